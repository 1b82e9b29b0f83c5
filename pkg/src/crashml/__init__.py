"""Fatal road-crash classification with an SVM and bagged-tree voting ensemble."""

__version__ = "0.1.0"
