from TrajCert.infrastructure.data.csv_store import format_number, read_csv, write_csv
from TrajCert.infrastructure.data.dataset_store import load_dataset, save_dataset

__all__ = ["format_number", "load_dataset", "read_csv", "save_dataset", "write_csv"]
