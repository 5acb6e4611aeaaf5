import pytest

from chainanchor.simulation import RunConfig, World


def build_world(store_dir, seed=11, boats=2, events=3, days=1, **kwargs) -> World:
    config = RunConfig(
        seed=seed,
        boats=boats,
        events_per_boat_per_day=events,
        days=days,
        store_dir=store_dir,
        **kwargs,
    )
    return World(config)


@pytest.fixture
def small_world(tmp_path):
    """One fully run and settled day: 2 boats x 3 events, both chains synced."""
    world = build_world(tmp_path / "store")
    world.run()
    return world
