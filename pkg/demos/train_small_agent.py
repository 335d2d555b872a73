"""Train the recurrent multi-agent PPO controller briefly and compare it with random.

A 30k-step run on the desk-scale network takes well under a minute on one
core. The learning curve is printed as training proceeds.

    python3 demos/train_small_agent.py
"""
from mecoffload import Config, MecEnv, Trainer, TrainConfig
from mecoffload.experiments import episode_seeds, greedy_evaluator, run_episodes, summarize
from mecoffload.policies import RandomPolicy

cfg = Config().replace(sim={"num_mds": 3, "num_eds": 2, "episode_slots": 50})
train_cfg = TrainConfig(step_max=30_000, eval_interval=5_000, eval_episodes=5, seed=1)

trainer = Trainer(lambda: MecEnv(cfg), train_cfg)
evaluate = greedy_evaluator(cfg, episode_seeds(train_cfg.eval_seed, train_cfg.eval_episodes))
trainer.train(evaluate)
for point in trainer.curve:
    print(f"step {point['total_steps']:>6}  greedy cost {point['cost']:.2f}")

seeds = episode_seeds(99, 10)
trained = summarize(run_episodes(cfg, trainer.greedy_policy(), seeds))["cost"]
random_cost = summarize(run_episodes(cfg, RandomPolicy(0), seeds))["cost"]
print(f"held-out seeds: trained {trained:.2f}, random {random_cost:.2f}")
