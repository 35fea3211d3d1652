"""Command-line front end: file formats, certificates and commands."""
