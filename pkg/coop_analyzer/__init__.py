"""Package entrypoint for coop_analyzer."""

__all__ = []
