"""
CSV tables exported by the evaluation and schedule tools.
"""

import csv
import os
from pathlib import Path
from typing import Any, List, Optional, Sequence, Union

from napselect.exceptions import DataFormatError

PathLike = Union[str, Path]


class CSVHandler:
    """
    Reads and writes header-first CSV tables (precision/recall curves, learning-rate rows).
    """

    @staticmethod
    def write_table(file_path: PathLike, headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> int:
        """
        Write a header row followed by ``rows``, creating parent directories.

        Args:
            file_path: CSV file to write
            headers: Column names
            rows: Data rows, each as wide as ``headers``

        Returns:
            Number of data rows written

        Raises:
            DataFormatError: If a row's width differs from the header's
        """
        width = len(headers)
        for index, row in enumerate(rows):
            if len(row) != width:
                # line numbers count the header
                raise DataFormatError(f"row has {len(row)} columns, header has {width}", source=file_path,
                                      line=index + 2)

        os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
        with open(file_path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(headers)
            writer.writerows(rows)
        return len(rows)

    @staticmethod
    def read_table(file_path: PathLike, headers: Optional[Sequence[str]] = None) -> List[List[str]]:
        """
        Read the data rows of a table, checking the header when ``headers`` is given.

        Raises:
            FileNotFoundError: If the file doesn't exist
            DataFormatError: On an empty file or an unexpected header
        """
        if not os.path.exists(file_path):
            raise FileNotFoundError(f"File not found: {file_path}")

        with open(file_path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            found = next(reader, None)
            if found is None:
                raise DataFormatError("table has no header row", source=file_path)
            if headers is not None and found != list(headers):
                raise DataFormatError(f"expected header {list(headers)}, found {found}", source=file_path, line=1)
            return list(reader)
