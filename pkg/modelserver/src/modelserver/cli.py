"""`modelserver serve` entry point."""

from __future__ import annotations

import click
import uvicorn

from .encoder import ModelConfig
from .server import create_app


@click.group(name="modelserver")
def cli():
    """Transformer inference microservice (embed + score)."""


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8200, show_default=True)
@click.option("--backend", type=click.Choice(["builtin", "transformers"]),
              default="builtin", show_default=True)
@click.option("--model-name", default=None,
              help="Checkpoint path for the transformers backend.")
@click.option("--dim", default=768, show_default=True)
@click.option("--max-tokens", default=512, show_default=True)
@click.option("--uses-url", is_flag=True,
              help="Append the document URL to the scorer input.")
@click.option("--seed", default=0, show_default=True)
def serve(host, port, backend, model_name, dim, max_tokens, uses_url, seed):
    """Serve /embed and /score until interrupted."""
    cfg = ModelConfig(
        backend=backend,
        model_name=model_name,
        dim=dim,
        max_tokens=max_tokens,
        uses_url=uses_url,
        seed=seed,
    )
    click.echo(f"serving {backend} encoder (dim={dim}) on http://{host}:{port}")
    uvicorn.run(create_app(cfg), host=host, port=port, log_level="warning")


def main():
    cli(auto_envvar_prefix="MODELSERVER")


if __name__ == "__main__":
    main()
