from datagen.dataset_io import load_dataset, save_dataset
from datagen.generate import generate_expert, generate_play
from datagen.trajectories import OfflineDataset, Trajectory
from datagen.window_index import WindowIndex, build_index, query_ball, query_positions
