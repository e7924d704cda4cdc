"""groundloop: interface-grounded rollouts with verifiable rewards and GRPO-style surrogates."""

__version__ = "0.1.0"
