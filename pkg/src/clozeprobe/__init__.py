"""Syntax- and semantics-controlled cloze-prompt probing of masked LMs."""

from .core import (
    ConstraintSource,
    Corpus,
    Grouping,
    InfoContent,
    KnowledgeTriple,
    PromptType,
    RelationSpec,
    Strategy,
    SyntaxFamily,
    TypeConstraintSet,
    TypeEntry,
    info_content,
    syntax_family,
)
from .templating import MASK_TOKEN, PromptInstance, article_for, render, render_family

__version__ = "0.1.0"

__all__ = [
    "ConstraintSource",
    "Corpus",
    "Grouping",
    "InfoContent",
    "KnowledgeTriple",
    "MASK_TOKEN",
    "PromptInstance",
    "PromptType",
    "RelationSpec",
    "Strategy",
    "SyntaxFamily",
    "TypeConstraintSet",
    "TypeEntry",
    "article_for",
    "info_content",
    "render",
    "render_family",
    "syntax_family",
    "__version__",
]
