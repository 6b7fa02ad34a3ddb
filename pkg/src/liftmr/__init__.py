"""liftmr: lifts sequential MJ loops to verified MapReduce jobs."""

__version__ = "0.1.0"
