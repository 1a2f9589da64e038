from envs.layout import MazeLayout, layout_to_text, load_layout, parse_layout
from envs.maze import GoalSpec, GridMaze, Maze, PointMaze, make_env, pairwise_distance
