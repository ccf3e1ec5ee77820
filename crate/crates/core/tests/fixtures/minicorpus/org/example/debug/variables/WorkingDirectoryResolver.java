package org.example.debug.variables;

public class WorkingDirectoryResolver {

    private StringVariableManager variableManager;

    public String resolveWorkingDirectory(String variableExpression) throws CoreException {
        return variableManager.performStringSubstitution(variableExpression);
    }

    public boolean isDirectoryValid(String directoryPath) {
        return directoryPath != null && !directoryPath.isEmpty();
    }
}
