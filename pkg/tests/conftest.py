import pytest

from aernoc.topology import LinkTiming, build_mesh, build_torus, build_tree


@pytest.fixture
def mesh3():
    return build_mesh(3, 3, LinkTiming(1, 1))


@pytest.fixture
def mesh4():
    return build_mesh(4, 4, LinkTiming(1, 1))


@pytest.fixture
def torus4():
    return build_torus(4, 4, link_params=LinkTiming(1, 1))


@pytest.fixture
def bintree():
    return build_tree(2, 4, LinkTiming(2, 1))
