"""roughdev test suite."""
