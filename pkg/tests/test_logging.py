import logging

from napselect.cli import EXIT_OK, main
from napselect.utils import setup_logging


def test_console_only_by_default():
    logger = setup_logging()
    assert [type(h) for h in logger.handlers] == [logging.StreamHandler]
    assert logger.level == logging.INFO


def test_dated_log_file(tmp_path):
    logger = setup_logging(log_dir=tmp_path / "logs", level=logging.DEBUG)
    logger.debug("bank built")
    for handler in logger.handlers:
        handler.flush()
    (log_file,) = (tmp_path / "logs").glob("napselect_*.log")
    assert "DEBUG - bank built" in log_file.read_text()


def test_handlers_attached_once():
    setup_logging()
    assert len(setup_logging().handlers) == 1


def test_cli_log_dir_keeps_stdout_clean(tmp_path, capsys):
    assert main(["--log-dir", str(tmp_path), "schedule", "--kind", "const", "--epochs", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("{")
    assert list(tmp_path.glob("napselect_*.log"))
