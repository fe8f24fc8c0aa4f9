"""Command-line front end: config files, data files, phantoms, metrics and the self-test."""
