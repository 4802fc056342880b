from pydantic import BaseModel, Field
from typing import Any, Dict, List, Optional
from enum import Enum

class DomainKind(str, Enum):
    BALL = "ball"
    BOX = "box"
    SIMPLEX = "simplex"

class CreateSessionRequest(BaseModel):
    """Request model for creating a new learner session."""
    algorithm: str = Field(description="Algorithm name, see GET /algorithms/")
    size: int = Field(ge=1, description="Number of experts K, or dimension d")
    prior: Optional[List[float]] = Field(
        default=None,
        description="Prior over experts; uniform if omitted"
    )
    diameter: float = Field(default=2.0, gt=0, description="Diameter D of the centred ball")
    initial_scale: Optional[float] = Field(
        default=None, gt=0,
        description="Input scale B, required by the clipped variants"
    )
    domain: Optional[DomainKind] = Field(
        default=None,
        description="Domain for the reduced variants and OGD, built with radius D/2"
    )
    loss_range: Optional[float] = Field(default=None, gt=0, description="Loss range L for hedge")
    horizon: Optional[int] = Field(default=None, ge=1, description="Horizon T for hedge")

class SessionResponse(BaseModel):
    """Response model for session creation."""
    session_id: str
    status: str

class SessionStateResponse(BaseModel):
    """Response model for session state."""
    session_id: str
    algorithm: str
    setting: str
    round: int
    prediction: List[float]
    b_t: float
    B_t: float
    restarts: List[int]
    active_slaves: Optional[int]

class RoundRequest(BaseModel):
    """Loss vector (experts) or gradient at the last prediction (oco)."""
    observation: List[float]

class RoundResponse(BaseModel):
    """Response model for a submitted round."""
    round: int
    prediction: List[float]
    b_t: float
    B_t: float
    restart: bool
    active_slaves: Optional[int]
    potential: Optional[float]

class AlgorithmsResponse(BaseModel):
    algorithms: List[str]

SnapshotResponse = Dict[str, Any]
