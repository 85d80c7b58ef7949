"""Command-line runner: configs, presets, sweeps and result files."""
