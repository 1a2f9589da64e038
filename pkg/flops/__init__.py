from flops.model import (
    FlopModel,
    episode_cost_frozen,
    episode_cost_ttt,
    flops_table,
    forward_cost,
    matched_width,
)
