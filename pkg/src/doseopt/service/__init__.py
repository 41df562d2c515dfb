"""Trial-conduct HTTP service: event-sourced state, FastAPI app."""
