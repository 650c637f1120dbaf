"""Add a doc string to my files."""
