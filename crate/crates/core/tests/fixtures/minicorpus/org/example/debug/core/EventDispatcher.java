package org.example.debug.core;

import java.util.ArrayList;
import java.util.List;

public class EventDispatcher {

    private final List<IDebugEventListener> eventListeners = new ArrayList<>();

    public void dispatchDebugEvent(DebugEvent event) {
        for (IDebugEventListener listener : eventListeners) {
            listener.handleDebugEvent(event);
        }
    }

    public void addDebugEventListener(IDebugEventListener listener) {
        eventListeners.add(listener);
    }
}
