"""Architecture family endpoints."""

from typing import Any

from fastapi import APIRouter

from app.models.activation import Family
from app.models.architecture import ArchDescriptor
from app.schemas.similarity import ArchitectureResponse
from app.services import arch_family

router = APIRouter()


def _describe(descriptor: ArchDescriptor) -> ArchitectureResponse:
    violations = arch_family.validate(descriptor)
    return ArchitectureResponse(
        descriptor=descriptor,
        violations=violations,
        param_count=None if violations else arch_family.param_count(descriptor)
    )


@router.get("/{family}/{depth}", response_model=ArchitectureResponse)
def read_architecture(family: Family, depth: int) -> Any:
    """Descriptor of one family member with its parameter count."""
    return _describe(arch_family.descriptor_for(family, depth))


@router.post("/validate", response_model=ArchitectureResponse)
def validate_architecture(descriptor: ArchDescriptor) -> Any:
    """Check a submitted descriptor against the family rules."""
    return _describe(descriptor)
