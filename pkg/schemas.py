"""Request bodies accepted by the HTTP API."""
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class AnalysisRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: str = Field(min_length=1, description="Complete .pgcl file text")
    post: Optional[str] = None
    budget: Optional[int] = Field(default=None, gt=0)
    epsilon: Optional[float] = Field(default=None, gt=0)
    escape: Optional[Literal["error", "stop"]] = None

    def analysis_overrides(self) -> Dict[str, object]:
        overrides = {"budget": self.budget, "epsilon": self.epsilon, "escape": self.escape}
        return {k: v for k, v in overrides.items() if v is not None}


class WpRequest(AnalysisRequest):
    transformer: Literal["dwp", "awp", "wpre-dwp", "wpre-awp"] = "dwp"
    eval: List[Dict[str, str]] = Field(default_factory=list)


class CheckRequest(AnalysisRequest):
    provider: Optional[Literal["superinv", "dast-subinv", "dpast-subinv"]] = None
    direction: Optional[Literal["upper", "lower"]] = None
    threshold: Optional[str] = None


class TransformRequest(AnalysisRequest):
    direction: Optional[Literal["upper", "lower"]] = None
    determinize: Optional[Literal["left", "right"]] = None
    oracle: bool = True


class MdpRequest(AnalysisRequest):
    mode: Optional[Literal["min", "max"]] = None
    strategy: bool = False
    export: bool = False
    escape_reward: Optional[str] = None
