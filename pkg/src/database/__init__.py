"""SQLite run registry."""
