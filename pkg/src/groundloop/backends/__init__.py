"""Environment backends behind the common query(text) -> result contract."""
