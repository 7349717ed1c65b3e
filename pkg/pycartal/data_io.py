import json
import os
import string
import tempfile
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.axes import Axes
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.colors import to_hex
from matplotlib.figure import Figure
from matplotlib.lines import Line2D
from sklearn.datasets import make_blobs
from sklearn.utils import murmurhash3_32

from .cartography import DataMapStats, CartographyLabels
from .config import ExperimentConfig
from .constants import DatasetFormat, Featurizer, Strategy, ENCODING, EXPORT_FLOAT_FORMAT, \
    CORRECTNESS_COLORMAP, CURVE_COLORMAP
from .exceptions import DatasetError, ExportError
from .logger import logger
from .simulator import InstancePool, IterationRecord, RunHistory
from .stats import AsoMatrix

PathLike = Union[str, Path]

# Figure size in inches, SVG output is measured in points (72 per inch)
FIGURE_SIZE = (6.4, 4.8)
SVG_DPI = 72
# Axes rectangle (left, bottom, width, height) in figure fractions, the right margin holds the data map legend
AXES_RECT = (0.1, 0.12, 0.66, 0.8)
CANVAS_WIDTH = FIGURE_SIZE[0] * SVG_DPI
CANVAS_HEIGHT = FIGURE_SIZE[1] * SVG_DPI
PLOT_LEFT = AXES_RECT[0] * CANVAS_WIDTH
PLOT_TOP = (1 - AXES_RECT[1] - AXES_RECT[3]) * CANVAS_HEIGHT
PLOT_WIDTH = AXES_RECT[2] * CANVAS_WIDTH
PLOT_HEIGHT = AXES_RECT[3] * CANVAS_HEIGHT

DC_NAMESPACE = 'http://purl.org/dc/elements/1.1/'
# Fixed layout, text kept as text, stable element ids and unsimplified paths
SVG_STYLE = {
    'figure.autolayout': False,
    'figure.constrained_layout.use': False,
    'svg.fonttype': 'none',
    'svg.hashsalt': 'pycartal',
    'path.simplify': False,
}


class RawDataset:
    """Text records with string labels, labels mapped to indices via the (sorted) label vocabulary"""
    ids: np.ndarray
    texts: List[str]
    labels: List[str]
    vocabulary: List[str]

    def __init__(self, ids: np.ndarray, texts: List[str], labels: List[str], vocabulary: Optional[List[str]] = None):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.texts = texts
        self.labels = labels
        self.vocabulary = vocabulary if vocabulary is not None else sorted(set(labels))

    def __len__(self):
        return len(self.texts)

    @property
    def num_classes(self) -> int:
        return len(self.vocabulary)

    def label_indices(self) -> np.ndarray:
        index = {label: position for position, label in enumerate(self.vocabulary)}
        return np.asarray([index[label] for label in self.labels], dtype=np.int64)


class EmbeddingTable:
    """Token -> vector map of fixed dimension"""
    vectors: Dict[str, np.ndarray]
    dim: int

    def __init__(self, vectors: Dict[str, np.ndarray], dim: int):
        self.vectors = vectors
        self.dim = dim

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors


class FeatureTable:
    features: np.ndarray
    featurizer: Featurizer
    parameters: Dict[str, Any]

    def __init__(self, features: np.ndarray, featurizer: Featurizer, parameters: Dict[str, Any]):
        self.features = features
        self.featurizer = featurizer
        self.parameters = parameters

    def __len__(self):
        return len(self.features)

    @property
    def dim(self) -> int:
        return self.features.shape[1]


class PlotArea:
    """
    Affine map from data coordinates to SVG user units (points) of an axes placed at AXES_RECT, the same map
    matplotlib applies when saving: x grows to the right, y grows upwards in data space and downwards on the canvas
    """
    x_range: Tuple[float, float]
    y_range: Tuple[float, float]

    def __init__(self, x_range: Tuple[float, float], y_range: Tuple[float, float]):
        self.x_range = x_range
        self.y_range = y_range

    def x(self, value: float) -> float:
        low, high = self.x_range
        return PLOT_LEFT + (value - low) / (high - low) * PLOT_WIDTH

    def y(self, value: float) -> float:
        low, high = self.y_range
        return PLOT_TOP + (high - value) / (high - low) * PLOT_HEIGHT

    def invert_x(self, pixel: float) -> float:
        low, high = self.x_range
        return low + (pixel - PLOT_LEFT) / PLOT_WIDTH * (high - low)

    def invert_y(self, pixel: float) -> float:
        low, high = self.y_range
        return high - (pixel - PLOT_TOP) / PLOT_HEIGHT * (high - low)


DATAMAP_AREA = PlotArea((0.0, 0.5), (0.0, 1.0))


def detect_format(path: PathLike, dataset_format: str = '') -> DatasetFormat:
    if dataset_format != '':
        return DatasetFormat(dataset_format)

    suffix = Path(path).suffix.lower()
    if suffix in ['.jsonl', '.json']:
        return DatasetFormat.jsonl
    if suffix in ['.csv']:
        return DatasetFormat.csv

    raise DatasetError(f'Cannot detect dataset format of {path}, set dataset_format')


def parse_id(value: Any, location: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise DatasetError(f'Invalid id {value!r} ({location})') from None


def read_jsonl_records(path: PathLike) -> List[Tuple[Optional[int], str, str, str]]:
    records = []
    try:
        with open(path, 'r', encoding=ENCODING) as file:
            for number, line in enumerate(file, start=1):
                if line.strip() == '':
                    continue
                location = f'{path}, line {number}'
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DatasetError(f'Malformed JSON ({location}): {e.msg}') from None
                if not isinstance(record, dict) or 'text' not in record or 'label' not in record:
                    raise DatasetError(f'Record needs "text" and "label" keys ({location})')
                if record['text'] is None or record['label'] is None or str(record['label']) == '':
                    raise DatasetError(f'Record has a null "text" or an empty "label" ({location})')

                instance_id = parse_id(record['id'], location) if record.get('id') is not None else None
                records.append((instance_id, str(record['text']), str(record['label']), location))
    except OSError as e:
        raise DatasetError(f'Failed to read dataset {path} ({e})') from None

    return records


def read_csv_records(path: PathLike) -> List[Tuple[Optional[int], str, str, str]]:
    """
    Records of a CSV file with an id,text,label header (id optional). Rows whose fields are all empty count as
    blank lines and are skipped, rows with an empty text or label field are rejected. Reported line numbers
    account for line breaks inside quoted fields.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding=ENCODING)
    except OSError as e:
        raise DatasetError(f'Failed to read dataset {path} ({e})') from None
    except pd.errors.ParserError as e:
        raise DatasetError(f'Malformed CSV in {path} ({e})') from None

    missing = {'text', 'label'} - set(frame.columns)
    if missing:
        raise DatasetError(f'Dataset {path} lacks column(s): {", ".join(sorted(missing))}')

    records = []
    # Line 1 is the header
    number = 2
    for row in frame.fillna('').itertuples(index=False):
        row = row._asdict()
        location = f'{path}, line {number}'
        number += 1 + sum(value.count('\n') for value in row.values())
        if all(value == '' for value in row.values()):
            continue
        for field in ['text', 'label']:
            if row[field] == '':
                raise DatasetError(f'Missing or empty "{field}" field ({location})')

        instance_id = parse_id(row['id'], location) if row.get('id', '') != '' else None
        records.append((instance_id, row['text'], row['label'], location))

    return records


def load_dataset(path: PathLike, dataset_format: str = '', vocabulary: Optional[List[str]] = None) -> RawDataset:
    """
    Load text records from JSONL (one {"id", "text", "label"} object per line) or CSV (header id,text,label)
    :param path: Dataset file
    :param dataset_format: "jsonl", "csv" or "" to detect the format by file suffix
    :param vocabulary: Known labels (e.g. of the train split); any other label is rejected
    :return: Records in file order; ids default to the record position
    """
    dataset_format = detect_format(path, dataset_format)
    if dataset_format is DatasetFormat.jsonl:
        records = read_jsonl_records(path)
    else:
        records = read_csv_records(path)

    ids, seen = [], set()
    for position, (instance_id, _, label, location) in enumerate(records):
        instance_id = position if instance_id is None else instance_id
        if instance_id in seen:
            raise DatasetError(f'Duplicate id {instance_id} ({location})')
        if vocabulary is not None and label not in vocabulary:
            raise DatasetError(f'Unknown label {label!r} ({location})')
        seen.add(instance_id)
        ids.append(instance_id)

    texts = [text for _, text, _, _ in records]
    labels = [label for _, _, label, _ in records]
    logger.info(f'Loaded {len(records)} records from {path}')

    return RawDataset(np.asarray(ids, dtype=np.int64), texts, labels, vocabulary)


def load_embeddings(path: PathLike) -> EmbeddingTable:
    """
    Load a word-vector text file: one token per line followed by its space separated values, optionally
    preceded by a "count dim" header line
    """
    vectors: Dict[str, np.ndarray] = {}
    dim = None
    try:
        with open(path, 'r', encoding=ENCODING) as file:
            for number, line in enumerate(file, start=1):
                parts = line.rstrip('\n').rstrip().split(' ')
                if parts == ['']:
                    continue
                if number == 1 and len(parts) == 2 and all(part.isdigit() for part in parts):
                    continue

                token = parts[0]
                try:
                    vector = np.asarray(parts[1:], dtype=np.float64)
                except ValueError:
                    raise DatasetError(f'Invalid vector values ({path}, line {number})') from None
                if dim is None:
                    dim = len(vector)
                if len(vector) != dim or dim == 0:
                    raise DatasetError(f'Expected {dim} values for token {token!r}, got {len(vector)} '
                                       f'({path}, line {number})')
                if token in vectors:
                    raise DatasetError(f'Duplicate token {token!r} ({path}, line {number})')
                vectors[token] = vector
    except OSError as e:
        raise DatasetError(f'Failed to read embeddings {path} ({e})') from None

    if dim is None:
        raise DatasetError(f'Embedding file {path} contains no vectors')

    logger.info(f'Loaded {len(vectors)} {dim}-dimensional embeddings from {path}')
    return EmbeddingTable(vectors, dim)


def tokenize(text: str) -> List[str]:
    """Lowercase, split on whitespace, strip leading/trailing punctuation, drop empty tokens"""
    tokens = (token.strip(string.punctuation) for token in text.lower().split())
    return [token for token in tokens if token != '']


def warn_empty(ids: List[int]) -> None:
    if ids:
        logger.warning(f'{len(ids)} instance(s) have no tokens and get a zero vector (e.g. id {ids[0]})')


def featurize(raw: RawDataset, embeddings: EmbeddingTable, max_length: int) -> FeatureTable:
    """
    Sum of the embeddings of the first `max_length` tokens, out-of-vocabulary tokens contributing nothing
    """
    features = np.zeros((len(raw), embeddings.dim))
    empty = []
    for row, (instance_id, text) in enumerate(zip(raw.ids, raw.texts)):
        tokens = tokenize(text)[:max_length]
        if not tokens:
            empty.append(int(instance_id))
        for token in tokens:
            vector = embeddings.vectors.get(token)
            if vector is not None:
                features[row] += vector
    warn_empty(empty)

    return FeatureTable(features, Featurizer.embedding, {'max_length': max_length, 'dim': embeddings.dim})


def featurize_hashed(raw: RawDataset, dim: int, seed: int = 0, max_length: Optional[int] = None) -> FeatureTable:
    """
    Signed hashed bag of words: every token adds +-1 at its hashed index, the count profile is scaled
    by 1/sqrt(number of tokens)
    """
    if dim < 2:
        raise DatasetError(f'Hash dimension must be at least 2, got {dim}')

    features = np.zeros((len(raw), dim))
    empty = []
    for row, (instance_id, text) in enumerate(zip(raw.ids, raw.texts)):
        tokens = tokenize(text)[:max_length]
        if not tokens:
            empty.append(int(instance_id))
            continue
        for token in tokens:
            hashed = int(murmurhash3_32(token, seed=seed))
            features[row, abs(hashed) % dim] += 1.0 if hashed >= 0 else -1.0
        features[row] /= np.sqrt(len(tokens))
    warn_empty(empty)

    return FeatureTable(features, Featurizer.hashed, {'dim': dim, 'seed': seed, 'max_length': max_length})


def make_synthetic(config: ExperimentConfig) -> InstancePool:
    """Gaussian blob pool, one blob per class"""
    features, labels = make_blobs(
        n_samples=config.synthetic_size + config.synthetic_test_size,
        n_features=config.synthetic_features,
        centers=config.synthetic_classes,
        cluster_std=config.synthetic_spread,
        random_state=config.synthetic_seed
    )
    train = slice(0, config.synthetic_size)
    test = slice(config.synthetic_size, None)

    return InstancePool(
        config.dataset,
        features[train], labels[train],
        features[test], labels[test],
        [str(label) for label in range(config.synthetic_classes)]
    )


def build_pool(config: ExperimentConfig) -> InstancePool:
    """
    Load and featurize the configured train and test splits
    """
    if config.is_synthetic:
        return make_synthetic(config)

    train = load_dataset(config.dataset, config.dataset_format)
    test = load_dataset(config.test_dataset, config.dataset_format, train.vocabulary)
    if config.featurizer is Featurizer.embedding:
        embeddings = load_embeddings(config.embeddings)
        train_table = featurize(train, embeddings, config.max_length)
        test_table = featurize(test, embeddings, config.max_length)
    else:
        train_table = featurize_hashed(train, config.hash_dim, config.hash_seed, config.max_length)
        test_table = featurize_hashed(test, config.hash_dim, config.hash_seed, config.max_length)

    return InstancePool(
        Path(config.dataset).name,
        train_table.features, train.label_indices(),
        test_table.features, test.label_indices(),
        train.vocabulary,
        train.ids, test.ids
    )


def provenance_header(config: ExperimentConfig, pool_size: int, dataset: str, seeds: Optional[Sequence[int]] = None,
                      **extra: Any) -> str:
    """
    Leading comment line of every output: config hash, seeds (those of the config unless given), pool size,
    dataset and any extra key/value pairs
    """
    fields = {
        'config_hash': config.config_hash(),
        'seeds': ','.join(map(str, config.seeds if seeds is None else seeds)),
        'pool_size': pool_size,
        'dataset': dataset,
        **extra
    }
    return '# ' + ' '.join(f'{key}={value}' for key, value in fields.items()) + '\n'


def read_provenance(path: PathLike) -> Dict[str, str]:
    """Key/value pairs of the leading comment line (or of the description of an SVG), empty if there is none"""
    if Path(path).suffix.lower() == '.svg':
        return read_svg_provenance(path)

    try:
        with open(path, 'r', encoding=ENCODING) as file:
            first = file.readline()
    except OSError as e:
        raise DatasetError(f'Failed to read {path} ({e})') from None
    if not first.startswith('#'):
        return {}

    return dict(field.split('=', 1) for field in first[1:].split() if '=' in field)


def write_atomic(path: PathLike, write: Any) -> Path:
    """
    Write via a temporary file in the target directory, then rename it over the target
    :param path: Target path
    :param write: Callable receiving the open (text, LF line endings) temporary file
    :return: Target path
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        descriptor, temporary = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
        try:
            with os.fdopen(descriptor, 'w', encoding=ENCODING, newline='\n') as file:
                write(file)
            os.replace(temporary, path)
        except BaseException:
            if os.path.exists(temporary):
                os.unlink(temporary)
            raise
    except OSError as e:
        raise ExportError(f'Failed to write {path} ({e})') from None

    logger.info(f'Wrote {path}')
    return path


def write_table(frame: pd.DataFrame, path: PathLike, header: str = '', index: bool = False,
                **kwargs: Any) -> Path:
    def write(file):
        file.write(header)
        frame.to_csv(file, index=index, float_format=EXPORT_FLOAT_FORMAT, lineterminator='\n', **kwargs)

    return write_atomic(path, write)


def read_table(path: PathLike, **kwargs: Any) -> pd.DataFrame:
    try:
        return pd.read_csv(path, comment='#', encoding=ENCODING, **kwargs)
    except OSError as e:
        raise DatasetError(f'Failed to read {path} ({e})') from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetError(f'Malformed table {path} ({e})') from None


def selected_ids_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(f'{path.stem}_selected_ids{path.suffix}')


def write_histories(histories: List[RunHistory], path: PathLike, header: str = '') -> List[Path]:
    """Write the accuracy history and its selected-ids sidecar"""
    history = pd.concat([history.to_frame() for history in histories], ignore_index=True)
    selected = pd.concat([history.selected_frame() for history in histories], ignore_index=True)

    return [write_table(history, path, header), write_table(selected, selected_ids_path(path), header)]


def read_histories(path: PathLike) -> List[RunHistory]:
    """
    Read a history file (and its selected-ids sidecar, if present) back into one RunHistory per strategy
    """
    provenance = read_provenance(path)
    frame = read_table(path, dtype={'strategy': str})
    required = ['strategy', 'seed', 'iteration', 'labeled_count', 'accuracy']
    if any(column not in frame.columns for column in required):
        raise DatasetError(f'History file {path} needs columns {", ".join(required)}')

    sidecar = selected_ids_path(path)
    selections: Dict[Tuple[str, int, int], Tuple[np.ndarray, str]] = {}
    if sidecar.exists():
        selected = read_table(sidecar, dtype={'strategy': str, 'fallback': str, 'selected_ids': str},
                              keep_default_na=False)
        for row in selected.itertuples(index=False):
            ids = np.asarray(row.selected_ids.split(), dtype=np.int64)
            selections[(row.strategy, int(row.seed), int(row.iteration))] = (ids, row.fallback)

    histories = []
    for strategy in pd.unique(frame['strategy']):
        rows = frame[frame['strategy'] == strategy]
        records = []
        for row in rows.itertuples(index=False):
            ids, fallback = selections.get((strategy, int(row.seed), int(row.iteration)), (None, ''))
            records.append(IterationRecord(int(row.seed), int(row.iteration), int(row.labeled_count),
                                           float(row.accuracy), ids, Strategy(fallback) if fallback else None))
        histories.append(RunHistory(
            strategy,
            provenance.get('dataset', ''),
            int(provenance.get('pool_size', 0)),
            [int(seed) for seed in pd.unique(rows['seed'])],
            records
        ))

    return histories


def datamap_frame(stats: DataMapStats, gold_labels: np.ndarray, labels: CartographyLabels) -> pd.DataFrame:
    return pd.DataFrame({
        'id': stats.ids,
        'confidence': stats.confidence,
        'variability': stats.variability,
        'correctness': stats.correctness,
        'gold_label': np.asarray(gold_labels, dtype=np.int64),
        'cartography_label': labels.labels,
    }, columns=['id', 'confidence', 'variability', 'correctness', 'gold_label', 'cartography_label'])


def export_datamap(stats: DataMapStats, gold_labels: np.ndarray, labels: CartographyLabels, path: PathLike,
                   header: str = '') -> Path:
    return write_table(datamap_frame(stats, gold_labels, labels), path, header)


def read_datamap(path: PathLike) -> Tuple[DataMapStats, np.ndarray, np.ndarray]:
    """
    :return: Data map stats, gold labels and cartography labels
    """
    frame = read_table(path)
    epochs = int(read_provenance(path).get('epochs', 0))
    stats = DataMapStats(frame['id'].to_numpy(), frame['confidence'].to_numpy(), frame['variability'].to_numpy(),
                         frame['correctness'].to_numpy(), epochs)
    return stats, frame['gold_label'].to_numpy(), frame['cartography_label'].to_numpy()


def density_frame(counts: np.ndarray, variability_edges: np.ndarray, confidence_edges: np.ndarray) -> pd.DataFrame:
    rows = []
    for x in range(counts.shape[0]):
        for y in range(counts.shape[1]):
            rows.append((variability_edges[x], variability_edges[x + 1], confidence_edges[y],
                         confidence_edges[y + 1], int(counts[x, y])))

    return pd.DataFrame(rows, columns=['variability_low', 'variability_high', 'confidence_low', 'confidence_high',
                                       'count'])


def aso_frame(matrices: List[AsoMatrix], iterations: Optional[List[int]] = None) -> pd.DataFrame:
    """Long layout of one or more grids: one row per ordered pair"""
    rows = []
    for position, matrix in enumerate(matrices):
        for (row, column), result in matrix.results.items():
            iteration = iterations[position] if iterations is not None else ''
            rows.append((iteration, row, column, result.epsilon, result.violation_ratio, result.margin,
                         matrix.corrected_alpha, int(result.degenerate)))

    return pd.DataFrame(rows, columns=['iteration', 'strategy_a', 'strategy_b', 'epsilon', 'violation_ratio',
                                       'margin', 'corrected_alpha', 'degenerate'])


def write_aso_matrix(matrix: AsoMatrix, path: PathLike, header: str = '') -> Path:
    """Grid layout, rows tested against columns, blank diagonal"""
    return write_table(matrix.to_frame(), path, header, index=True, na_rep='')


def correctness_palette(levels: int) -> List[str]:
    """
    `levels` colors sampled evenly along the correctness colormap (first level: lowest correctness)
    """
    colormap = matplotlib.colormaps[CORRECTNESS_COLORMAP].resampled(levels)
    return [to_hex(colormap(level)) for level in range(levels)]


def new_figure(area: PlotArea, x_label: str, y_label: str, title: str) -> Tuple[Figure, Axes]:
    """Figure on the Agg canvas with a single axes at AXES_RECT, limits fixed to the plot area"""
    figure = Figure(figsize=FIGURE_SIZE)
    FigureCanvasAgg(figure)
    axes = figure.add_axes(AXES_RECT)
    axes.set_xlim(*area.x_range)
    axes.set_ylim(*area.y_range)
    axes.set_xlabel(x_label)
    axes.set_ylabel(y_label)
    axes.set_title(title)
    return figure, axes


def write_svg(figure: Figure, path: PathLike, header: str = '') -> Path:
    """Save as SVG, the provenance header (if any) goes into the description metadata"""
    metadata = {'Date': None}
    if header != '':
        metadata['Description'] = header.lstrip('#').strip()

    def write(file):
        figure.savefig(file, format='svg', metadata=metadata)

    return write_atomic(path, write)


def read_svg_provenance(path: PathLike) -> Dict[str, str]:
    try:
        root = ET.parse(path).getroot()
    except (OSError, ET.ParseError) as e:
        raise DatasetError(f'Failed to read {path} ({e})') from None

    description = root.find(f'.//{{{DC_NAMESPACE}}}description')
    if description is None or not description.text:
        return {}

    return dict(field.split('=', 1) for field in description.text.split() if '=' in field)


def emit_svg_datamap(stats: DataMapStats, path: PathLike, header: str = '') -> Path:
    """
    Scatter of variability (x, [0, 0.5]) against confidence (y, [0, 1]) colored by correctness level
    round(correctness * E). Each level is one marker group with id "correctness-<level>", holding its instances
    in data map order.
    """
    if len(stats) == 0:
        raise ExportError(f'Cannot plot an empty data map to {path}')

    epochs = max(stats.epochs, 1)
    levels = np.rint(stats.correctness * epochs).astype(np.int64)
    palette = correctness_palette(epochs + 1)

    with matplotlib.rc_context(SVG_STYLE):
        figure, axes = new_figure(DATAMAP_AREA, 'variability', 'confidence', 'Data map')
        handles = []
        for level, color in enumerate(palette):
            members = levels == level
            axes.plot(stats.variability[members], stats.confidence[members], linestyle='none', marker='o',
                      markersize=3, color=color, gid=f'correctness-{level}', clip_on=False)
            handles.append(Line2D([], [], linestyle='none', marker='o', color=color, label=f'{level / epochs:.2f}'))
        axes.legend(handles=handles, title='correctness', loc='upper left', bbox_to_anchor=(1.02, 1.0),
                    fontsize='small')

        return write_svg(figure, path, header)


def curve_points(history: RunHistory) -> Tuple[np.ndarray, np.ndarray]:
    """Labeled fraction and seed-mean accuracy per iteration"""
    if history.pool_size <= 0:
        raise ExportError(f'History of {history.strategy} lacks the pool size needed for labeled fractions')

    return history.labeled_counts() / history.pool_size, np.mean(history.accuracy_matrix(), axis=0)


def curves_area(histories: List[RunHistory]) -> PlotArea:
    fractions = np.concatenate([curve_points(history)[0] for history in histories])
    low, high = float(fractions.min()), float(fractions.max())
    if high == low:
        low, high = low - 0.5, high + 0.5

    return PlotArea((low, high), (0.0, 1.0))


def emit_svg_curves(histories: List[RunHistory], path: PathLike, header: str = '') -> Path:
    """
    One line per strategy of seed-mean accuracy over the labeled fraction of the train pool (x spans the observed
    fractions, y spans [0, 1]). Lines have id "curve-<strategy>" and a marker at every iteration.
    """
    if not histories:
        raise ExportError(f'Cannot plot learning curves without any history to {path}')
    iterations = {history.iterations for history in histories}
    if len(iterations) != 1:
        raise ExportError(f'Histories have differing iteration counts: {sorted(iterations)}')

    area = curves_area(histories)
    colors = matplotlib.colormaps[CURVE_COLORMAP].colors
    with matplotlib.rc_context(SVG_STYLE):
        figure, axes = new_figure(area, 'labeled fraction', 'accuracy', 'Accuracy over active learning iterations')
        for position, history in enumerate(histories):
            fractions, accuracies = curve_points(history)
            axes.plot(fractions, accuracies, marker='o', markersize=4, linewidth=2,
                      color=colors[position % len(colors)], label=history.strategy,
                      gid=f'curve-{history.strategy}', clip_on=False)
        axes.legend(loc='lower right', fontsize='small')

        return write_svg(figure, path, header)
