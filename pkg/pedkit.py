#!/usr/bin/env python3
"""
pedkit entry point: python pedkit.py <command> [options]
"""
from src.cli import main

if __name__ == '__main__':
    main()
