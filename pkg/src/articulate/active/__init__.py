from .dqn import (AgentConfig, Episode, QNetwork, ReplayBuffer, Transition, dqn_train, epsilon, greedy_policy,
                  huber, moving_average, td_update, train_scene_seeds)
from .env import (FAILURE_PENALTY, STEP_LIMIT, SUCCESS, SUCCESS_BONUS, ActiveEnv, EnvConfig, EnvState, View,
                  env_reset, env_step, oracle_best_action, scene_for_seed, step_reward)

__all__ = ["AgentConfig", "Episode", "QNetwork", "ReplayBuffer", "Transition", "dqn_train", "epsilon",
           "greedy_policy", "huber", "moving_average", "td_update", "train_scene_seeds",
           "FAILURE_PENALTY", "STEP_LIMIT", "SUCCESS", "SUCCESS_BONUS", "ActiveEnv", "EnvConfig", "EnvState", "View",
           "env_reset", "env_step", "oracle_best_action", "scene_for_seed", "step_reward"]
