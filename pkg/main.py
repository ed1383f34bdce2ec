"""Entry point: python main.py <command> ... (see `python main.py --help`)."""
from src.cli import main

if __name__ == "__main__":
    main()
