from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from app.api.models import (
    AlgorithmsResponse,
    CreateSessionRequest,
    RoundRequest,
    RoundResponse,
    SessionResponse,
    SessionStateResponse,
    SnapshotResponse,
)
from app.api.session_manager import SessionManager
from app.learning.models.errors import ProjectionError

app = FastAPI(title="Lipschitz-Adaptive Learner API")

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],  # Adjust this in production
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

session_manager = SessionManager()

@app.get("/")
async def root():
    """Health check endpoint."""
    return {"status": "ok", "message": "Learner API is running"}

@app.post("/sessions/", response_model=SessionResponse)
async def create_session(request: CreateSessionRequest):
    """Create a new learner session."""
    try:
        session_id = session_manager.create_session(
            algorithm=request.algorithm,
            size=request.size,
            prior=request.prior,
            diameter=request.diameter,
            initial_scale=request.initial_scale,
            domain=request.domain.value if request.domain is not None else None,
            loss_range=request.loss_range,
            horizon=request.horizon,
        )
        return {"session_id": session_id, "status": "created"}
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

@app.get("/sessions/{session_id}", response_model=SessionStateResponse)
async def get_session_state(session_id: str):
    """Get the current state of a session."""
    try:
        return session_manager.get_session_state(session_id)
    except KeyError:
        raise HTTPException(status_code=404, detail="Session not found")

@app.post("/sessions/{session_id}/rounds", response_model=RoundResponse)
async def submit_round(session_id: str, request: RoundRequest):
    """Feed one round's observation to the learner."""
    try:
        return session_manager.submit_round(session_id, request.observation)
    except KeyError:
        raise HTTPException(status_code=404, detail="Session not found")
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except ProjectionError as e:
        raise HTTPException(status_code=422, detail=str(e))

@app.get("/sessions/{session_id}/snapshot", response_model=SnapshotResponse)
async def get_snapshot(session_id: str):
    """Get a JSON snapshot of the learner state."""
    try:
        return session_manager.get_snapshot(session_id)
    except KeyError:
        raise HTTPException(status_code=404, detail="Session not found")

@app.delete("/sessions/{session_id}")
async def delete_session(session_id: str):
    """Delete a session."""
    try:
        session_manager.delete_session(session_id)
        return {"session_id": session_id, "status": "deleted"}
    except KeyError:
        raise HTTPException(status_code=404, detail="Session not found")

@app.get("/algorithms/", response_model=AlgorithmsResponse)
async def list_algorithms():
    """Get the algorithm names accepted by POST /sessions/."""
    return {"algorithms": session_manager.get_available_algorithms()}
