import numpy as np
import pytest

from wavenilm import NetworkConfig, build_network


def small_config(inputs=2, loads=2, widths=(8, 8, 8), dilations=(1, 2, 4),
                 dense=8, dropout=0.0, mask_channel=0):
    return NetworkConfig(
        input_channels=inputs, output_loads=loads, block_widths=widths,
        dilations=dilations, filter_length=2, dropout_rate=dropout,
        input_dense_width=dense, mask_channel=mask_channel)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_net():
    return build_network(small_config(), seed=7)
