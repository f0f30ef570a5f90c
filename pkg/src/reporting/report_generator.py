"""Markdown reports for training runs and experiment matrices."""
import math
from typing import Dict, List, Sequence, Tuple
from jinja2 import Environment, FileSystemLoader
from pathlib import Path

CONV_LABELS = {'conv3d': '3D', 'conv2plus1d': '(2+1)D'}


def _format_score(value) -> str:
    if value is None:
        return '-'
    if isinstance(value, str):
        return value
    if isinstance(value, float) and math.isnan(value):
        return 'undefined'
    return f"{value:.4f}"


class ReportGenerator:
    """Render experiment results with Jinja2 templates.

    Rendering is a pure function of its inputs: no timestamps or paths.
    """

    def __init__(self, config, logger):
        """Initialize report generator.

        Args:
            config: Configuration object
            logger: Logger instance
        """
        self.config = config
        self.logger = logger

        # Set up Jinja2 template environment
        template_dir = Path(__file__).parent / 'templates'
        self.jinja_env = Environment(
            loader=FileSystemLoader(str(template_dir)),
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )
        self.jinja_env.filters['score'] = _format_score

    def render_matrix_report(self, rows: Sequence, title: str = 'Experiment matrix') -> str:
        """Render matrix results grouped by backbone, with one column per aggregation.

        Args:
            rows: MatrixResult rows (spearman may be 'failed')
            title: Report heading

        Returns:
            Markdown report string
        """
        groups = self._group_by_backbone(rows)
        template = self.jinja_env.get_template('matrix_report.md.j2')
        report = template.render(title=title, groups=groups, total=len(rows),
                                 failed=sum(1 for r in rows if r.failed))
        self.logger.info(f"Matrix report rendered with {len(rows)} rows")
        return report

    def render_training_report(self, report, spec) -> str:
        """Render the per-epoch curve table and best/final correlations of a training run.

        Args:
            report: EvalReport with per_epoch_history
            spec: ExperimentSpec that produced it

        Returns:
            Markdown report string
        """
        template = self.jinja_env.get_template('training_report.md.j2')
        return template.render(
            name=spec.name,
            backbone=spec.backbone,
            conv_label=CONV_LABELS.get(spec.backbone.conv_type, spec.backbone.conv_type),
            aggregation=spec.aggregation.kind,
            train=spec.train,
            history=report.per_epoch_history,
            best_spearman=report.best_spearman,
            best_epoch=report.best_epoch,
            final_spearman=report.final_spearman,
            mean_loss=report.mean_loss,
        )

    def _group_by_backbone(self, rows: Sequence) -> List[Dict]:
        """Merge rows sharing (depth, conv_type, clip_len), keeping first-seen order.

        Args:
            rows: MatrixResult rows

        Returns:
            One dict per backbone with 'average' and 'weight_decider' scores
        """
        grouped: Dict[Tuple, Dict] = {}
        for row in rows:
            key = (row.depth, row.conv_type, row.clip_len)
            entry = grouped.setdefault(key, {
                'depth': row.depth,
                'conv': CONV_LABELS.get(row.conv_type, row.conv_type),
                'clip_len': row.clip_len,
                'average': None,
                'weight_decider': None,
                'params': {},
            })
            entry[row.aggregation] = row.spearman
            entry['params'][row.aggregation] = row.params

        for entry in grouped.values():
            avg, wd = entry['average'], entry['weight_decider']
            numeric = all(isinstance(v, float) and not math.isnan(v) for v in (avg, wd))
            entry['gain'] = f"{wd - avg:+.4f}" if numeric else '-'
            entry['params'] = ' / '.join(str(p) for p in entry['params'].values())
        return list(grouped.values())
