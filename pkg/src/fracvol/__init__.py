import poetry_version

__version__ = poetry_version.extract(source_file=__file__)
