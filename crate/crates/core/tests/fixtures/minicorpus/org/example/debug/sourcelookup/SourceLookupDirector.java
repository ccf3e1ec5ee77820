package org.example.debug.sourcelookup;

import java.util.ArrayList;
import java.util.List;

/**
 * Finds the source element that matches a stack frame.
 */
public class SourceLookupDirector {

    private List<ISourceContainer> sourceContainers = new ArrayList<>();
    private ISourceLookupParticipant lookupParticipant;

    public Object getSourceElement(IStackFrame frame) {
        for (ISourceContainer container : sourceContainers) {
            Object found = lookupSourceFile(container, frame.getSourceName());
            if (found != null) {
                return found;
            }
        }
        return null;
    }

    public Object lookupSourceFile(ISourceContainer container, String sourceName) {
        return container.findSourceElement(sourceName);
    }

    public void addSourceContainer(ISourceContainer container) {
        sourceContainers.add(container);
    }
}
