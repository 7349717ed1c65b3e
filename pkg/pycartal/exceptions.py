class Error(Exception):
    pass


class ConfigError(Error):
    pass


class ParameterError(Error):
    pass


class ShapeError(Error):
    pass


class TrainingError(Error):
    pass


class DatasetError(Error):
    pass


class SelectionError(Error):
    pass


class DegenerateLabelsError(SelectionError):
    pass


class StatisticsError(Error):
    pass


class ExportError(Error):
    pass
