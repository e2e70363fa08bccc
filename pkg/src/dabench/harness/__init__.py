"""Instance ingestion, benchmark orchestration, analysis and the CLI."""
