from .config import ConfigError, EnvConfig, RewardConfig, RunConfig, TrainConfig, load_config, parse_config
from .episode import FrontierAgent, NetAgent, run_episode, sample_start
from .learner import Learner, td_targets, train_step
from .mdp import GoalClass, classify_goal, compute_reward, encode_state, select_action
from .replay import Batch, ReplayBuffer, Transition
