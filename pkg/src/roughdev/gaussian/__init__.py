"""fBM / BM sampling, rough-path lifts and Cameron–Martin controls."""
