"""
Flight Stack - Training Curriculum
Stage schedule that raises the commanded speed cap and obstacle density as the teacher improves
"""

from dataclasses import dataclass


@dataclass
class CurriculumSchedule:
    """
    Current curriculum stage

    The speed cap is applied through the action scale (speed_cap / full_speed),
    which scales both the thrust authority above hover and the body-rate range.
    """
    initial_speed_cap: float = 3.0
    full_speed: float = 12.0
    speed_factor: float = 1.5
    initial_density: float = 0.4
    density_factor: float = 1.25
    enabled: bool = True
    stage: int = 0
    speed_cap: float = 0.0
    density: float = 0.0

    def __post_init__(self):
        if not self.enabled:
            self.speed_cap = self.full_speed
            self.density = 1.0
        elif self.speed_cap == 0.0:
            self.speed_cap = min(self.initial_speed_cap, self.full_speed)
            self.density = min(self.initial_density, 1.0)

    @classmethod
    def from_config(cls, curriculum_config) -> "CurriculumSchedule":
        return cls(
            initial_speed_cap=curriculum_config.initial_speed_cap,
            full_speed=curriculum_config.full_speed,
            speed_factor=curriculum_config.speed_factor,
            initial_density=curriculum_config.initial_density,
            density_factor=curriculum_config.density_factor,
            enabled=curriculum_config.enabled,
        )

    @property
    def action_scale(self) -> float:
        return self.speed_cap / self.full_speed

    @property
    def is_final(self) -> bool:
        return self.speed_cap >= self.full_speed and self.density >= 1.0

    def advance(self) -> bool:
        """Move to the next stage; returns False when already final"""
        if self.is_final:
            return False
        self.stage += 1
        self.speed_cap = min(self.speed_cap * self.speed_factor, self.full_speed)
        self.density = min(self.density * self.density_factor, 1.0)
        return True
