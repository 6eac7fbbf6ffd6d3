import json
import math

import numpy as np
import pytest

from subconvolutive import cube_intrinsic_sequence, degenerate_sequence
from utils.errors import ValidationError
from utils.sequence_io import load_sequence, save_sequence, sequence_from_dict, sequence_to_dict


def _write(path, text):
    path.write_text(text)
    return path


class TestSequenceFiles:
    def test_negative_infinity_survives_a_file(self, tmp_path):
        path = tmp_path / 'degenerate.json'
        save_sequence(degenerate_sequence(3), path)
        assert '"-inf"' in path.read_text()
        loaded = load_sequence(path)
        assert loaded.n_max == 3
        assert loaded.row(3)[1] == -math.inf
        assert loaded.row(3)[0] == 0.0

    def test_cube_values_preserved(self, tmp_path):
        seq = cube_intrinsic_sequence(1.5, 5)
        path = tmp_path / 'cube.json'
        save_sequence(seq, path)
        for n in range(1, 6):
            np.testing.assert_array_equal(load_sequence(path).row(n), seq.row(n))

    def test_dict_layout(self):
        data = sequence_to_dict(degenerate_sequence(2))
        assert data == {'n_max': 2, 'log_mu': [[0.0, 0.0], [0.0, '-inf', 0.0]]}
        assert sequence_from_dict(data).row(2)[1] == -math.inf

    def test_nan_literal_rejected(self, tmp_path):
        path = _write(tmp_path / 'nan.json', '{"n_max": 1, "log_mu": [[0.0, NaN]]}')
        with pytest.raises(ValidationError):
            load_sequence(path)

    def test_infinity_literal_rejected(self, tmp_path):
        path = _write(tmp_path / 'inf.json', '{"n_max": 1, "log_mu": [[0.0, -Infinity]]}')
        with pytest.raises(ValidationError):
            load_sequence(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            load_sequence(tmp_path / 'absent.json')

    def test_invalid_json(self, tmp_path):
        with pytest.raises(ValidationError):
            load_sequence(_write(tmp_path / 'broken.json', '{"n_max": 1,'))

    @pytest.mark.parametrize('data', [
        [],
        {'n_max': 1},
        {'n_max': True, 'log_mu': [[0.0, 0.0]]},
        {'n_max': 1, 'log_mu': 'rows'},
        {'n_max': 1, 'log_mu': [0.0]},
        {'n_max': 1, 'log_mu': [[0.0, 'zero']]},
        {'n_max': 2, 'log_mu': [[0.0, 0.0]]},
    ])
    def test_malformed_documents(self, tmp_path, data):
        path = _write(tmp_path / 'bad.json', json.dumps(data))
        with pytest.raises(ValidationError):
            load_sequence(path)
