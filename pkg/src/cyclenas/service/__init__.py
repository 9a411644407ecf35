"""HTTP service wrapping the search engine.

Routes are thin: request/response validation lives in
:mod:`cyclenas.service.schemas`, the actual work in
:mod:`cyclenas.service.operations`, and long-running searches in the
:mod:`cyclenas.service.jobs` run manager. The CLI drives the same
operations layer in-process.
"""

from .app import create_app  # noqa: F401
