"""Blockchain ETL: raw blocks, receipts and traces to datasets and statistics."""

__version__ = "0.1.0"
