"""Configuration, experiment specs, logging and errors."""
