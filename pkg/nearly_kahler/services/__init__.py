"""Run orchestration shared by the CLI and library callers."""
