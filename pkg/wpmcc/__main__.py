"""Allow running the CLI as a module: python -m wpmcc"""
from wpmcc.cli import main
main()
