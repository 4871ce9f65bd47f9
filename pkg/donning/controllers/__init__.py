# Command blueprints for the CLI
