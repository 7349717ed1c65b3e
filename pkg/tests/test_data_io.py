import tempfile
import unittest
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
from numpy.testing import assert_array_equal, assert_allclose

from pycartal import DatasetError, ExportError
from pycartal.cartography import DataMapStats, CartographyLabels
from pycartal.config import ExperimentConfig
from pycartal.constants import Featurizer, Strategy
from pycartal.data_io import RawDataset, EmbeddingTable, DATAMAP_AREA, load_dataset, load_embeddings, tokenize, \
    featurize, featurize_hashed, make_synthetic, build_pool, provenance_header, read_provenance, write_table, \
    read_table, write_histories, read_histories, selected_ids_path, export_datamap, read_datamap, density_frame, \
    write_aso_matrix, aso_frame, emit_svg_datamap, emit_svg_curves, curves_area, correctness_palette
from pycartal.simulator import IterationRecord, RunHistory
from pycartal.stats import ScoreSample, aso_matrix

SVG = '{http://www.w3.org/2000/svg}'


def marker_positions(path: Path, gid: str) -> np.ndarray:
    """(x, y) of every marker drawn inside the group with the given id, in drawing order"""
    for group in ET.parse(path).getroot().iter(f'{SVG}g'):
        if group.get('id') == gid:
            return np.asarray([(float(use.get('x')), float(use.get('y'))) for use in group.iter(f'{SVG}use')],
                              dtype=np.float64).reshape(-1, 2)
    return np.zeros((0, 2))


def raw(*texts: str) -> RawDataset:
    return RawDataset(np.arange(len(texts)), list(texts), ['a'] * len(texts))


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def example_history(strategy: str, accuracies, seeds=(1, 2)) -> RunHistory:
    records = []
    for seed in seeds:
        for iteration, accuracy in enumerate(accuracies):
            selected = [seed * 100 + iteration] if iteration < len(accuracies) - 1 else None
            fallback = Strategy.least_confidence if strategy == 'cal' and iteration == 0 else None
            records.append(IterationRecord(seed, iteration, 10 + 5 * iteration, accuracy, selected, fallback))
    return RunHistory(strategy, 'toy', 100, list(seeds), records)


class TempDirTestCase(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()

    def write(self, name: str, content: str) -> Path:
        path = self.path.joinpath(name)
        path.write_text(content, encoding='utf-8')
        return path


class LoadDatasetTest(TempDirTestCase):
    def test_jsonl(self):
        # GIVEN
        path = self.write('train.jsonl', '{"id": 7, "text": "Good movie", "label": "pos"}\n'
                                         '\n'
                                         '{"id": 3, "text": "Bad movie", "label": "neg"}\n')

        # WHEN
        dataset = load_dataset(path)

        # THEN
        assert_array_equal([7, 3], dataset.ids)
        self.assertEqual(['Good movie', 'Bad movie'], dataset.texts)
        self.assertEqual(['neg', 'pos'], dataset.vocabulary)
        assert_array_equal([1, 0], dataset.label_indices())

    def test_jsonl_without_ids(self):
        # GIVEN
        path = self.write('train.jsonl', '{"text": "one", "label": "x"}\n{"text": "two", "label": "y"}\n')

        # WHEN
        dataset = load_dataset(path)

        # THEN
        assert_array_equal([0, 1], dataset.ids)

    def test_jsonl_malformed_line(self):
        # GIVEN
        path = self.write('train.jsonl', '{"text": "one", "label": "x"}\n{"text": "two", \n')

        # WHEN / THEN
        with self.assertRaisesRegex(DatasetError, 'line 2'):
            load_dataset(path)

    def test_jsonl_missing_key(self):
        # GIVEN
        path = self.write('train.jsonl', '{"text": "one"}\n')

        # WHEN / THEN
        with self.assertRaisesRegex(DatasetError, 'line 1'):
            load_dataset(path)

    def test_duplicate_id(self):
        # GIVEN
        path = self.write('train.jsonl', '{"id": 1, "text": "one", "label": "x"}\n'
                                         '{"id": 1, "text": "two", "label": "x"}\n')

        # WHEN / THEN
        with self.assertRaisesRegex(DatasetError, 'Duplicate id 1'):
            load_dataset(path)

    def test_csv(self):
        # GIVEN
        path = self.write('train.csv', 'id,text,label\n4,"Hello, world",greeting\n9,Bye,farewell\n')

        # WHEN
        dataset = load_dataset(path)

        # THEN
        assert_array_equal([4, 9], dataset.ids)
        self.assertEqual(['Hello, world', 'Bye'], dataset.texts)
        self.assertEqual(['greeting', 'farewell'], dataset.labels)

    def test_csv_invalid_id(self):
        # GIVEN
        path = self.write('train.csv', 'id,text,label\n1,a,x\nabc,b,x\n')

        # WHEN / THEN
        with self.assertRaisesRegex(DatasetError, 'line 3'):
            load_dataset(path)

    def test_csv_missing_field(self):
        # GIVEN
        path = self.write('train.csv', 'id,text,label\n1,hello world,a\n2,missing label\n')

        # WHEN / THEN
        with self.assertRaisesRegex(DatasetError, '"label" field .*line 3'):
            load_dataset(path)

    def test_csv_empty_text(self):
        # GIVEN
        path = self.write('train.csv', 'id,text,label\n1,,a\n')

        # WHEN / THEN
        with self.assertRaisesRegex(DatasetError, '"text" field .*line 2'):
            load_dataset(path)

    def test_csv_line_numbers_follow_quoted_line_breaks(self):
        # GIVEN
        path = self.write('train.csv', 'id,text,label\n1,"first\nsecond\nthird",a\n\n2,,b\n')

        # WHEN / THEN
        with self.assertRaisesRegex(DatasetError, 'line 6'):
            load_dataset(path)

    def test_csv_skips_blank_lines(self):
        # GIVEN
        path = self.write('train.csv', 'id,text,label\n1,"two\nlines",a\n\n2,Bye,b\n')

        # WHEN
        dataset = load_dataset(path)

        # THEN
        assert_array_equal([1, 2], dataset.ids)
        self.assertEqual(['two\nlines', 'Bye'], dataset.texts)
        self.assertEqual(['a', 'b'], dataset.vocabulary)

    def test_jsonl_empty_label(self):
        # GIVEN
        path = self.write('train.jsonl', '{"text": "one", "label": "x"}\n{"text": "two", "label": ""}\n')

        # WHEN / THEN
        with self.assertRaisesRegex(DatasetError, 'line 2'):
            load_dataset(path)

    def test_csv_missing_column(self):
        # GIVEN
        path = self.write('train.csv', 'id,text\n1,a\n')

        # WHEN / THEN
        with self.assertRaisesRegex(DatasetError, 'label'):
            load_dataset(path)

    def test_unknown_label(self):
        # GIVEN
        path = self.write('test.jsonl', '{"text": "one", "label": "z"}\n')

        # WHEN / THEN
        with self.assertRaisesRegex(DatasetError, 'Unknown label'):
            load_dataset(path, vocabulary=['x', 'y'])

    def test_format_override_and_detection(self):
        # GIVEN
        path = self.write('train.txt', '{"text": "one", "label": "x"}\n')

        # WHEN / THEN
        self.assertEqual(1, len(load_dataset(path, 'jsonl')))
        self.assertRaises(DatasetError, load_dataset, path)

    def test_missing_file(self):
        # WHEN / THEN
        self.assertRaises(DatasetError, load_dataset, self.path.joinpath('missing.jsonl'))


class EmbeddingsTest(TempDirTestCase):
    def test_load(self):
        # GIVEN
        path = self.write('vectors.txt', '2 3\ncat 1 0 0\ndog 0 1 0.5\n')

        # WHEN
        embeddings = load_embeddings(path)

        # THEN
        self.assertEqual(3, embeddings.dim)
        self.assertEqual(2, len(embeddings))
        assert_array_equal([0.0, 1.0, 0.5], embeddings.vectors['dog'])

    def test_inconsistent_dimension(self):
        # GIVEN
        path = self.write('vectors.txt', 'cat 1 0 0\ndog 0 1\n')

        # WHEN / THEN
        with self.assertRaisesRegex(DatasetError, 'line 2'):
            load_embeddings(path)

    def test_duplicate_token(self):
        # GIVEN
        path = self.write('vectors.txt', 'cat 1 0\ncat 0 1\n')

        # WHEN / THEN
        self.assertRaises(DatasetError, load_embeddings, path)

    def test_empty_file(self):
        # GIVEN
        path = self.write('vectors.txt', '')

        # WHEN / THEN
        self.assertRaises(DatasetError, load_embeddings, path)


class FeaturizeTest(unittest.TestCase):
    def setUp(self):
        self.embeddings = EmbeddingTable({
            'cat': np.asarray([1.0, 0.0, 2.0]),
            'dog': np.asarray([0.0, 3.0, 1.0]),
        }, 3)

    def test_tokenize(self):
        # WHEN / THEN
        self.assertEqual(['hello', 'world', "don't"], tokenize('Hello,  WORLD! "Don\'t" ...'))
        self.assertEqual([], tokenize('  !? '))

    def test_single_token(self):
        # WHEN
        table = featurize(raw('Cat'), self.embeddings, 10)

        # THEN
        assert_array_equal([[1.0, 0.0, 2.0]], table.features)
        self.assertEqual(Featurizer.embedding, table.featurizer)

    def test_sum_ignores_unknown_tokens(self):
        # WHEN
        table = featurize(raw('cat dog cat zebra'), self.embeddings, 10)

        # THEN
        assert_array_equal([[2.0, 3.0, 5.0]], table.features)

    def test_truncation(self):
        # WHEN
        table = featurize(raw('dog cat cat'), self.embeddings, 2)

        # THEN
        assert_array_equal([[1.0, 3.0, 3.0]], table.features)

    def test_empty_text(self):
        # WHEN
        with self.assertLogs('pycartal', level='WARNING'):
            table = featurize(raw('...', 'cat'), self.embeddings, 10)

        # THEN
        assert_array_equal([0.0, 0.0, 0.0], table.features[0])

    def test_hashed_empty_text(self):
        # WHEN
        with self.assertLogs('pycartal', level='WARNING'):
            table = featurize_hashed(raw(''), 16)

        # THEN
        assert_array_equal(np.zeros((1, 16)), table.features)

    def test_hashed_single_token(self):
        # WHEN
        table = featurize_hashed(raw('cat'), 16)

        # THEN
        self.assertEqual(1, np.count_nonzero(table.features))
        self.assertEqual(1.0, np.abs(table.features).sum())

    def test_hashed_is_deterministic(self):
        # WHEN
        first = featurize_hashed(raw('the quick brown fox'), 64, seed=3)
        second = featurize_hashed(raw('The quick, brown fox!'), 64, seed=3)

        # THEN
        assert_array_equal(first.features, second.features)

    def test_hashed_scaling(self):
        # WHEN
        table = featurize_hashed(raw('cat cat cat cat'), 16)

        # THEN
        self.assertAlmostEqual(2.0, np.abs(table.features).sum())

    def test_hashed_similarity(self):
        # GIVEN
        texts = raw('the cat sat on the mat', 'the cat sat on a mat', 'quantum chromodynamics lecture notes')

        # WHEN
        features = featurize_hashed(texts, 300).features

        # THEN
        self.assertGreater(cosine(features[0], features[1]), cosine(features[0], features[2]))
        self.assertGreater(cosine(features[0], features[1]), 0.7)

    def test_hashed_invalid_dimension(self):
        # WHEN / THEN
        self.assertRaises(DatasetError, featurize_hashed, raw('cat'), 1)


class BuildPoolTest(TempDirTestCase):
    def test_synthetic(self):
        # GIVEN
        config = ExperimentConfig(dataset='synthetic', synthetic_size=30, synthetic_test_size=10,
                                  synthetic_classes=3, synthetic_features=5)

        # WHEN
        pool = make_synthetic(config)

        # THEN
        self.assertEqual(30, pool.train_size)
        self.assertEqual(10, len(pool.test_labels))
        self.assertEqual(5, pool.feature_dim)
        self.assertEqual(3, pool.num_classes)

    def test_synthetic_is_deterministic(self):
        # GIVEN
        config = ExperimentConfig(dataset='synthetic', synthetic_size=20, synthetic_test_size=5)

        # WHEN / THEN
        assert_array_equal(make_synthetic(config).train_features, make_synthetic(config).train_features)

    def test_from_files(self):
        # GIVEN
        train = self.write('train.jsonl', '{"id": 10, "text": "good", "label": "pos"}\n'
                                          '{"id": 11, "text": "bad", "label": "neg"}\n')
        test = self.write('test.jsonl', '{"id": 10, "text": "great", "label": "pos"}\n')
        config = ExperimentConfig(dataset=str(train), test_dataset=str(test), hash_dim=8)

        # WHEN
        pool = build_pool(config)

        # THEN
        self.assertEqual('train.jsonl', pool.name)
        self.assertEqual(['neg', 'pos'], pool.class_names)
        assert_array_equal([10, 11], pool.train_ids)
        assert_array_equal([10], pool.test_ids)
        assert_array_equal([1, 0], pool.train_labels)
        self.assertEqual((2, 8), pool.train_features.shape)

    def test_from_files_unknown_test_label(self):
        # GIVEN
        train = self.write('train.jsonl', '{"text": "good", "label": "pos"}\n{"text": "bad", "label": "neg"}\n')
        test = self.write('test.jsonl', '{"text": "meh", "label": "neutral"}\n')
        config = ExperimentConfig(dataset=str(train), test_dataset=str(test))

        # WHEN / THEN
        self.assertRaises(DatasetError, build_pool, config)


class TableTest(TempDirTestCase):
    def test_provenance(self):
        # GIVEN
        config = ExperimentConfig(dataset='synthetic', seeds=[3, 4])
        header = provenance_header(config, 250, 'synthetic', epochs=5)

        # WHEN
        path = self.write('table.csv', header + 'a,b\n1,2\n')
        provenance = read_provenance(path)

        # THEN
        self.assertEqual(config.config_hash(), provenance['config_hash'])
        self.assertEqual('3,4', provenance['seeds'])
        self.assertEqual('250', provenance['pool_size'])
        self.assertEqual('5', provenance['epochs'])

    def test_write_table_creates_directories(self):
        # GIVEN
        import pandas as pd
        frame = pd.DataFrame({'x': [0.1, 2.0], 'y': [1, 2]})
        path = self.path.joinpath('nested', 'out', 'table.csv')

        # WHEN
        write_table(frame, path, '# note=1\n')

        # THEN
        self.assertEqual('# note=1\nx,y\n0.1,1\n2,2\n', path.read_text(encoding='utf-8'))
        assert_allclose([0.1, 2.0], read_table(path)['x'])
        self.assertEqual(['table.csv'], [entry.name for entry in path.parent.iterdir()])

    def test_write_table_to_directory(self):
        # GIVEN
        import pandas as pd
        self.path.joinpath('taken').mkdir()

        # WHEN / THEN
        self.assertRaises(ExportError, write_table, pd.DataFrame({'x': [1]}), self.path.joinpath('taken'))

    def test_histories_round_trip(self):
        # GIVEN
        histories = [example_history('cal', [0.5, 0.75, 0.875]), example_history('random', [0.25, 0.5, 0.625])]
        path = self.path.joinpath('history.csv')
        header = provenance_header(ExperimentConfig(seeds=[1, 2]), 100, 'toy')

        # WHEN
        written = write_histories(histories, path, header)
        parsed = read_histories(path)

        # THEN
        self.assertEqual([path, selected_ids_path(path)], written)
        self.assertEqual(['cal', 'random'], [history.strategy for history in parsed])
        for original, copy in zip(histories, parsed):
            self.assertEqual(original.records, copy.records)
            self.assertEqual('toy', copy.dataset)
            self.assertEqual(100, copy.pool_size)
            self.assertEqual([1, 2], copy.seeds)

    def test_histories_without_sidecar(self):
        # GIVEN
        path = self.write('history.csv', 'strategy,seed,iteration,labeled_count,accuracy\nrandom,1,0,10,0.5\n')

        # WHEN
        history, = read_histories(path)

        # THEN
        self.assertEqual(0, len(history.records[0].selected_ids))
        self.assertEqual(0, history.pool_size)

    def test_histories_missing_columns(self):
        # GIVEN
        path = self.write('history.csv', 'strategy,seed\nrandom,1\n')

        # WHEN / THEN
        self.assertRaises(DatasetError, read_histories, path)

    def test_datamap_round_trip(self):
        # GIVEN
        stats = DataMapStats(np.asarray([5, 2, 9]), np.asarray([0.25, 0.5, 0.875]), np.asarray([0.125, 0.0, 0.25]),
                             np.asarray([0.5, 1.0, 0.25]), 4)
        labels = CartographyLabels(stats.ids, np.asarray([1, 1, 1]), 0.2)
        path = self.path.joinpath('datamap.csv')

        # WHEN
        export_datamap(stats, np.asarray([0, 1, 0]), labels, path,
                       provenance_header(ExperimentConfig(), 3, 'toy', epochs=4, split='seed'))
        parsed, gold, cartography = read_datamap(path)

        # THEN
        assert_array_equal(stats.ids, parsed.ids)
        assert_array_equal(stats.confidence, parsed.confidence)
        assert_array_equal(stats.variability, parsed.variability)
        assert_array_equal(stats.correctness, parsed.correctness)
        self.assertEqual(4, parsed.epochs)
        assert_array_equal([0, 1, 0], gold)
        assert_array_equal([1, 1, 1], cartography)

    def test_empty_datamap_is_header_only(self):
        # GIVEN
        empty = np.asarray([])
        stats = DataMapStats(empty, empty, empty, empty, 3)
        path = self.path.joinpath('datamap.csv')

        # WHEN
        export_datamap(stats, empty, CartographyLabels(empty, empty, 0.2), path)

        # THEN
        self.assertEqual('id,confidence,variability,correctness,gold_label,cartography_label\n',
                         path.read_text(encoding='utf-8'))

    def test_density_frame(self):
        # WHEN
        frame = density_frame(np.asarray([[1.0, 0.0], [0.0, 2.0]]), np.asarray([0.0, 0.25, 0.5]),
                              np.asarray([0.0, 0.5, 1.0]))

        # THEN
        self.assertEqual(4, len(frame))
        assert_array_equal([1, 0, 0, 2], frame['count'])
        assert_array_equal([0.25, 0.25, 0.5, 0.5], frame['variability_high'])

    def test_aso_outputs(self):
        # GIVEN
        rng = np.random.default_rng(0)
        samples = [ScoreSample(name, rng.random(10)) for name in ['cal', 'random']]
        matrix = aso_matrix(samples, bootstrap_iterations=100, aso_samples=100)
        path = self.path.joinpath('aso.csv')

        # WHEN
        write_aso_matrix(matrix, path)
        grid = read_table(path, index_col=0)
        pairs = aso_frame([matrix])

        # THEN
        self.assertEqual(['cal', 'random'], list(grid.columns))
        self.assertTrue(np.isnan(grid.loc['cal', 'cal']))
        self.assertAlmostEqual(matrix.results[('cal', 'random')].epsilon, grid.loc['cal', 'random'])
        self.assertEqual(2, len(pairs))
        self.assertEqual(['iteration', 'strategy_a', 'strategy_b', 'epsilon', 'violation_ratio', 'margin',
                          'corrected_alpha', 'degenerate'], list(pairs.columns))
        self.assertAlmostEqual(matrix.results[('cal', 'random')].margin,
                               pairs.loc[pairs['strategy_a'] == 'cal', 'margin'].iloc[0])


class SvgTest(TempDirTestCase):
    def test_correctness_palette(self):
        # WHEN
        palette = correctness_palette(5)

        # THEN
        self.assertEqual(['#440154', '#3b528b', '#21918c', '#5ec962', '#fde725'], palette)

    def test_datamap_coordinates_invert(self):
        # GIVEN
        rng = np.random.default_rng(0)
        stats = DataMapStats(np.arange(20), rng.random(20), 0.5 * rng.random(20), rng.integers(0, 5, 20) / 4, 4)
        path = self.path.joinpath('datamap.svg')

        # WHEN
        emit_svg_datamap(stats, path)

        # THEN
        levels = np.rint(stats.correctness * 4).astype(int)
        drawn = 0
        for level in range(5):
            members = np.flatnonzero(levels == level)
            positions = marker_positions(path, f'correctness-{level}')
            self.assertEqual(len(members), len(positions), level)
            assert_allclose(stats.variability[members], [DATAMAP_AREA.invert_x(x) for x, _ in positions], atol=1e-3)
            assert_allclose(stats.confidence[members], [DATAMAP_AREA.invert_y(y) for _, y in positions], atol=1e-3)
            drawn += len(positions)
        self.assertEqual(20, drawn)

    def test_datamap_single_instance(self):
        # GIVEN
        stats = DataMapStats(np.asarray([7]), np.asarray([0.75]), np.asarray([0.125]), np.asarray([0.5]), 2)
        path = self.path.joinpath('datamap.svg')

        # WHEN
        emit_svg_datamap(stats, path)

        # THEN
        positions = marker_positions(path, 'correctness-1')
        self.assertEqual(1, len(positions))
        assert_allclose([DATAMAP_AREA.x(0.125), DATAMAP_AREA.y(0.75)], positions[0], atol=1e-3)
        self.assertEqual(0, len(marker_positions(path, 'correctness-0')))

    def test_datamap_provenance(self):
        # GIVEN
        stats = DataMapStats(np.arange(3), np.full(3, 0.5), np.full(3, 0.25), np.ones(3), 1)
        path = self.path.joinpath('datamap.svg')
        header = provenance_header(ExperimentConfig(seeds=[4, 5]), 3, 'toy', epochs=1)

        # WHEN
        emit_svg_datamap(stats, path, header)

        # THEN
        provenance = read_provenance(path)
        self.assertEqual('4,5', provenance['seeds'])
        self.assertEqual(ExperimentConfig(seeds=[4, 5]).config_hash(), provenance['config_hash'])
        self.assertEqual('1', provenance['epochs'])

    def test_empty_datamap(self):
        # GIVEN
        empty = np.asarray([])

        # WHEN / THEN
        self.assertRaises(ExportError, emit_svg_datamap, DataMapStats(empty, empty, empty, empty, 1),
                          self.path.joinpath('datamap.svg'))

    def test_curves(self):
        # GIVEN
        histories = [example_history('cal', [0.5, 0.75, 0.875]), example_history('random', [0.25, 0.5, 0.625])]
        path = self.path.joinpath('curves.svg')

        # WHEN
        emit_svg_curves(histories, path)
        root = ET.parse(path).getroot()

        # THEN
        texts = [text.text for text in root.iter(f'{SVG}text')]
        self.assertIn('cal', texts)
        self.assertIn('random', texts)

        area = curves_area(histories)
        positions = marker_positions(path, 'curve-cal')
        assert_allclose([0.1, 0.15, 0.2], [area.invert_x(x) for x, _ in positions], atol=1e-4)
        assert_allclose([0.5, 0.75, 0.875], [area.invert_y(y) for _, y in positions], atol=1e-4)
        self.assertEqual(3, len(marker_positions(path, 'curve-random')))

    def test_constant_accuracy_is_horizontal(self):
        # GIVEN
        path = self.path.joinpath('curves.svg')
        histories = [example_history('random', [0.5, 0.5, 0.5, 0.5])]

        # WHEN
        emit_svg_curves(histories, path)

        # THEN
        positions = marker_positions(path, 'curve-random')
        self.assertEqual(4, len(positions))
        assert_allclose(np.full(4, curves_area(histories).y(0.5)), positions[:, 1], atol=1e-4)

    def test_curves_misaligned(self):
        # GIVEN
        histories = [example_history('cal', [0.5, 0.75]), example_history('random', [0.25, 0.5, 0.625])]

        # WHEN / THEN
        self.assertRaises(ExportError, emit_svg_curves, histories, self.path.joinpath('curves.svg'))


if __name__ == '__main__':
    unittest.main()
