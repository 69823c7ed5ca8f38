# run_branch_bayes.py
"""Command-line entry point: python run_branch_bayes.py <command> [options]."""

from src.cli import main

if __name__ == "__main__":
    main()
