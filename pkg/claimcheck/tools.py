import hashlib
import json
import os
import signal
import threading
from contextlib import contextmanager
from typing import Any, ContextManager, Sequence

import torch
from tqdm import tqdm

from claimcheck.config import Config


@contextmanager
def create_progress_bar(description: str, total: int, unit: str) -> ContextManager:
    if Config.silent:
        yield lambda **_: None
    else:
        progress_bar = tqdm(desc=description, total=total, leave=False, unit=unit)

        def on_progress(**postfix: Any) -> None:
            progress_bar.update()

            if postfix:
                progress_bar.set_postfix(**postfix)

        try:
            yield on_progress
        finally:
            progress_bar.close()


@contextmanager
def delay_keyboard_interrupt() -> ContextManager:
    if threading.current_thread() is not threading.main_thread():
        yield
        return

    interrupt_signal = None

    def interrupt_handler(sig, frame):
        nonlocal interrupt_signal
        interrupt_signal = (sig, frame)

    handler = signal.signal(signal.SIGINT, interrupt_handler)

    try:
        yield
    finally:
        signal.signal(signal.SIGINT, handler)

    if interrupt_signal is not None and callable(handler):
        handler(*interrupt_signal)


def make_generator(seed: int) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(seed)
    return generator


def vocabulary_hash(entities: Sequence[str], relations: Sequence[str]) -> str:
    """
    Computes a fingerprint of the entity and relation vocabularies, order included.

    Returns
    -------
    result : str
        The MD5 hex digest of both vocabularies.
    """
    vocabulary_digest = hashlib.md5()

    for name in entities:
        vocabulary_digest.update(b"E" + name.encode("utf8") + b"\0")

    for name in relations:
        vocabulary_digest.update(b"R" + name.encode("utf8") + b"\0")

    return vocabulary_digest.hexdigest()


def write_json(path: str, document: Any) -> None:
    """
    Writes a JSON document to a temporary file and renames it over the target so a
    reader never sees a partial file.
    """
    temporary_path = f"{path}.partial"

    with delay_keyboard_interrupt():
        with open(temporary_path, "w", encoding="utf-8") as file:
            json.dump(document, file, indent=2, sort_keys=True)
            file.write("\n")

        os.replace(temporary_path, path)


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as file:
        return json.load(file)
