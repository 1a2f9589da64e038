from ttt.config import TTTConfig
from ttt.episode import EpisodeRecord, finetune, run_episode_frozen, run_episode_ttt
from ttt.evaluate import EvalContext, ablate, aggregate, evaluate, frequency_sweep, model_scale
