from src.cli.app import app


def run() -> None:
    app(prog_name="facebias")


if __name__ == "__main__":
    run()
