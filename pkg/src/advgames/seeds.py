"""Deterministic randomness derivation for game trials.

Every random draw inside a trial comes from its own numpy generator, seeded
by ``SeedSequence([master_seed, trial_index, role, index])``.  The scheme is
splittable and public on purpose: any component that knows the trial context
can re-derive the exact stream another component used, which is what lets a
reduction adversary replay a composed game's draws bit for bit inside a
different game.

Roles:

* ``ROLE_GAME`` - draws made by the game itself (e.g. a hidden coin).
* ``ROLE_DATA`` - per-round corpus sampling, indexed by round.
* ``ROLE_LEARN`` - per-round learner randomness (noise), indexed by round.
* ``ROLE_ADV_LEARN`` - adversary learn-phase calls, indexed by round.
* ``ROLE_ACTOR`` - the final-phase actor.  Both a completeness generator and
  an adversary's infer phase draw from this stream, so a benign adversary
  reproduces the completeness game's prompts exactly.

Games running as subgames of a composed-oracle trial shift their per-round
indices by a configured offset so that their streams line up with the rounds
they occupy in the composed schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROLE_GAME = 0
ROLE_DATA = 1
ROLE_LEARN = 2
ROLE_ADV_LEARN = 3
ROLE_ACTOR = 4

MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class TrialCtx:
    """Identity of one trial; the root of all its derived randomness."""

    master_seed: int
    trial_index: int

    def rng(self, role: int, index: int = 0) -> np.random.Generator:
        seq = np.random.SeedSequence(
            [self.master_seed, self.trial_index, role, index]
        )
        return np.random.default_rng(seq)


def scenario_seed(suite_seed: int, position: int) -> int:
    """Derive an independent master seed for the scenario at ``position``."""
    seq = np.random.SeedSequence([suite_seed, position])
    return int(seq.generate_state(1, dtype=np.uint64)[0])
