from django.db import models
from django.core.validators import MinValueValidator, MaxValueValidator


VARIANT_CHOICES = [
    ('full', 'Full pipeline'),
    ('fixed_slot', 'Fixed slot (no curve indexing)'),
    ('no_lrl', 'No luminance library'),
    ('no_srl', 'No structural library'),
    ('no_sc', 'No spectral consistency'),
    ('no_bce', 'No structure supervision'),
    ('no_library', 'No libraries in the mask stage'),
]


class TrainingRun(models.Model):
    """One invocation of the training pipeline"""
    seed = models.IntegerField()
    variant = models.CharField(max_length=20, choices=VARIANT_CHOICES, default='full')
    epochs = models.IntegerField(validators=[MinValueValidator(0)])
    scenes = models.IntegerField(default=0, help_text="Scenes seen per epoch")
    config = models.JSONField(default=dict)
    loss_history = models.JSONField(default=dict, help_text="Per-stage mean loss per epoch")
    checkpoint_path = models.CharField(max_length=500)
    resumed = models.BooleanField(default=False)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.variant} seed={self.seed} ({self.epochs} epochs)"

    @property
    def final_losses(self):
        """Last recorded loss of every stage"""
        return {stage: values[-1] for stage, values in self.loss_history.items() if values}


class EvaluationReport(models.Model):
    """Metrics of a trained model on a corpus"""
    model_path = models.CharField(max_length=500)
    corpus_path = models.CharField(max_length=500)
    variant = models.CharField(max_length=20, choices=VARIANT_CHOICES, default='full')
    miou = models.FloatField(validators=[MinValueValidator(0), MaxValueValidator(1)])
    mgsr = models.FloatField(validators=[MinValueValidator(0), MaxValueValidator(1)])
    mgsr_center = models.FloatField(validators=[MinValueValidator(0), MaxValueValidator(1)])
    scenes = models.IntegerField(default=0)
    metrics = models.JSONField(default=dict)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.model_path} on {self.corpus_path}: mIoU {self.miou:.3f}"
