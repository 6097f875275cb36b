# ABOUTME: Data persistence package for mvpreg.
# ABOUTME: Handles CSV ingestion, column manifests and model files.
