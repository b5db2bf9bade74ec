"""File operations for the JSON artifacts: chains, partitions, couplings and base graphs."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

from pydantic import BaseModel, Field, ValidationError

from modules.chain_core import ReversibleChain
from modules.coupling import Coupling
from modules.decomposition import DecomposedSystem, FuzzyPartition
from modules.errors import ArtifactError, StructuralError
from modules.glued_graph import BaseGraph
from utils.formatters import to_json

logger = logging.getLogger(__name__)


class ChainFile(BaseModel):
    """{"states": [...], "pi": [...], "Q": [[...]...]}"""
    states: List[str]
    pi: List[float]
    Q: List[List[float]]


class PartitionFile(BaseModel):
    """{"classes": [...], "membership": [[...]...]} with rows in chain state order."""
    classes: List[str]
    membership: List[List[float]]


class CouplingPairFile(BaseModel):
    i: str
    j: str
    support: List[Tuple[str, str, float]]


class CouplingFile(BaseModel):
    """{"pairs": [{"i": ..., "j": ..., "support": [[x, y, mass]...]}...]}"""
    pairs: List[CouplingPairFile] = Field(default_factory=list)


class GraphFile(BaseModel):
    """{"vertices": [...], "edges": [[u, v]...], "H": [...]}"""
    vertices: List[str]
    edges: List[Tuple[str, str]]
    H: List[str] = Field(default_factory=list)


class FileHandler:
    """Handles file operations."""

    @staticmethod
    def read_file(file_path: Path) -> Tuple[bool, str]:
        """
        Read the content of a file.

        Args:
            file_path: Path to the file

        Returns:
            Tuple of (success, content or error message)
        """
        try:
            if not file_path.exists():
                return False, f"File not found at {file_path}"
            return True, file_path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            return False, f"Error reading file {file_path}: {str(e)}"

    @staticmethod
    def write_file(file_path: Path, content: str) -> Tuple[bool, str]:
        """
        Write content to a file, creating parent directories.

        Returns:
            Tuple of (success, message)
        """
        try:
            file_path.parent.mkdir(parents=True, exist_ok=True)
            file_path.write_text(content, encoding="utf-8")
            return True, f"Successfully wrote to {file_path}"
        except OSError as e:
            return False, f"Error writing to file: {str(e)}"

    @staticmethod
    def ensure_directory(directory_path: Path) -> Tuple[bool, str]:
        """
        Ensure a directory exists, creating it if necessary.

        Returns:
            Tuple of (success, message)
        """
        try:
            directory_path.mkdir(parents=True, exist_ok=True)
            return True, f"Directory {directory_path} is ready"
        except OSError as e:
            return False, f"Error creating directory: {str(e)}"

    @staticmethod
    def read_json(file_path: Path) -> Tuple[bool, Any]:
        """
        Read and parse a JSON file.

        Returns:
            Tuple of (success, parsed document or error message)
        """
        success, content = FileHandler.read_file(file_path)
        if not success:
            return False, content
        try:
            return True, json.loads(content)
        except json.JSONDecodeError as e:
            return False, f"Malformed JSON in {file_path}: {e}"

    @staticmethod
    def write_json(file_path: Path, document: Any) -> Tuple[bool, str]:
        """Write a document with sorted keys and 17 significant digits."""
        return FileHandler.write_file(file_path, to_json(document))


def _parse(model, file_path: Path):
    success, payload = FileHandler.read_json(file_path)
    if not success:
        raise ArtifactError(payload)
    try:
        return model.model_validate(payload)
    except ValidationError as e:
        raise ArtifactError(f"{file_path} does not match the {model.__name__} schema: {e}") from None


def chain_from_document(document: ChainFile) -> ReversibleChain:
    try:
        return ReversibleChain(tuple(document.states), document.pi, document.Q)
    except (StructuralError, ValueError) as e:
        raise ArtifactError(f"inconsistent chain: {e}") from None


def load_chain(file_path: Path) -> ReversibleChain:
    """
    Load a chain artifact.

    Raises:
        ArtifactError: if the file is missing, malformed or dimensionally inconsistent
    """
    chain = chain_from_document(_parse(ChainFile, file_path))
    logger.debug("loaded chain with %d states from %s", chain.n, file_path)
    return chain


def load_partition(file_path: Path, chain: ReversibleChain) -> FuzzyPartition:
    """Load a partition whose membership rows follow ``chain.states``."""
    document = _parse(PartitionFile, file_path)
    if len(document.membership) != chain.n:
        raise ArtifactError(
            f"partition has {len(document.membership)} rows but the chain has {chain.n} states"
        )
    try:
        return FuzzyPartition(tuple(document.classes), document.membership)
    except (StructuralError, ValueError) as e:
        raise ArtifactError(f"inconsistent partition: {e}") from None


def load_couplings(file_path: Path, chain: ReversibleChain) -> List[Coupling]:
    """Load couplings, translating state ids to chain indices."""
    document = _parse(CouplingFile, file_path)
    couplings = []
    for pair in document.pairs:
        try:
            support = [(chain.index(x), chain.index(y), mass) for x, y, mass in pair.support]
        except StructuralError as e:
            raise ArtifactError(f"coupling ({pair.i},{pair.j}): {e}") from None
        couplings.append(Coupling.from_triples(pair.i, pair.j, support))
    return couplings


def load_graph(file_path: Path) -> BaseGraph:
    """Load a base graph with its H list."""
    document = _parse(GraphFile, file_path)
    return BaseGraph(tuple(document.vertices), tuple(document.edges), tuple(document.H))


def chain_to_dict(chain: ReversibleChain) -> Dict[str, Any]:
    return {"states": list(chain.states), "pi": chain.pi.tolist(), "Q": chain.Q.tolist()}


def partition_to_dict(partition: FuzzyPartition) -> Dict[str, Any]:
    return {"classes": list(partition.class_ids), "membership": partition.membership.tolist()}


def couplings_to_dict(chain: ReversibleChain, couplings: Sequence[Coupling]) -> Dict[str, Any]:
    return {
        "pairs": [
            {"i": kappa.i, "j": kappa.j,
             "support": [[chain.states[x], chain.states[y], m] for x, y, m in kappa.triples()]}
            for kappa in sorted(couplings, key=lambda k: k.pair)
        ]
    }


def decomposition_to_dict(system: DecomposedSystem) -> Dict[str, Any]:
    """pi_hat and Q_hat as the "projection" chain, each (pi_i, Q_i) under "restrictions"."""
    return {
        "classes": list(system.class_ids),
        "projection": chain_to_dict(system.projection),
        "restrictions": {c: chain_to_dict(r) for c, r in zip(system.class_ids, system.restrictions)},
        "warnings": list(system.warnings),
    }
