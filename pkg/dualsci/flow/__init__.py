from .adapter import FlowRegressor, load_flow_adapter, save_flow_adapter
from .estimators import FlowContract, estimate, extract_bidirectional, fine_tune_hook
from .field import FlowField
from .horn_schunck import horn_schunck_pyramid, warp
