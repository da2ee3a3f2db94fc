#!/usr/bin/env python3
"""
Script entry point for the NapSelect command line.
"""

from napselect.cli import main


if __name__ == "__main__":
    exit(main())
