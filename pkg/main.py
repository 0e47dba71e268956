"""Run the hmm-ldpc command group, e.g. `python main.py fer --ebn0 2:3:0.25`."""
from src.cli import cli


def main() -> None:
    cli(prog_name="hmm-ldpc")


if __name__ == "__main__":
    main()
