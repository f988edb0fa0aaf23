from store.run_store import CellKey, RunStore, format_epsilon, format_size, trace_frame

__all__ = ["CellKey", "RunStore", "format_epsilon", "format_size", "trace_frame"]
