# ABOUTME: Command-line package for mvpreg.
# ABOUTME: Contains the subcommand handlers and report writers.
