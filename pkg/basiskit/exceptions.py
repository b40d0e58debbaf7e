class BasisKitException(Exception):
    """ Exception raised by basiskit """


class ConfigError(BasisKitException):
    """ Invalid run configuration """


class DataFormatError(BasisKitException):
    """ Malformed LibSVM text or CSV input """

    def __init__(self, message: str, line: int = None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class DatasetDownloadError(BasisKitException):
    """ Failed to fetch a dataset over HTTP """


class OutputError(BasisKitException):
    """ Nothing to write, or the chart inputs disagree """


class NumericalError(BasisKitException):
    """ Factorization failure or non-finite iterate """


class CompressorError(BasisKitException):
    """ Compressor parameter out of range """


class BasisError(BasisKitException):
    """ Rank failure, wrong space, or data outside the subspace """


class ContractViolation(BasisKitException):
    """ An algorithm invariant broke during a round """
