from .common import SearchResult, most_visited
from .descent import DescentConfig, DescentNode
from .puct import PuctConfig
from .uct import UctConfig

__all__ = ["SearchResult", "most_visited", "UctConfig", "PuctConfig",
           "DescentConfig", "DescentNode"]
