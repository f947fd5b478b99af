"""
The metrics module provides confusion matrices and the reports built
from them, plus readers and writers for their JSON, CSV and table
forms.

Zero-division convention: precision, recall or F1 is 0 whenever its
denominator is 0, and labels without support still count (as 0) in the
macro average.
"""
import csv
import io
import json
from dataclasses import dataclass, field

from .common import InvalidInput, make_2d_constant_array, require


class ConfusionMatrix(object):
    """
    A ConfusionMatrix counts (true, predicted) label pairs.

    Rows are true labels and columns are predicted labels, both in the
    order of labels.

    Arguments:
        labels: the ordered label names
        counts: an optional Q-by-Q list of counts to start from
    """
    def __init__(self, labels, counts=None):
        self.labels = list(labels)
        require(len(set(self.labels)) == len(self.labels),
                'confusion matrix labels must be unique')
        self._index = {label: i for i, label in enumerate(self.labels)}
        q = len(self.labels)
        if counts is None:
            counts = make_2d_constant_array(q, q, 0)
        require(len(counts) == q and all(len(row) == q for row in counts),
                'counts must be %d by %d' % (q, q))
        require(all(c >= 0 for row in counts for c in row),
                'counts must be non-negative')
        self.counts = [[int(c) for c in row] for row in counts]

    def index(self, label):
        if label not in self._index:
            raise InvalidInput('unknown label: %r' % (label,))
        return self._index[label]

    @property
    def total(self):
        return sum(sum(row) for row in self.counts)

    @property
    def trace(self):
        return sum(self.counts[i][i] for i in range(len(self.labels)))

    def row_sum(self, i):
        return sum(self.counts[i])

    def col_sum(self, j):
        return sum(row[j] for row in self.counts)

    def __eq__(self, other):
        return (isinstance(other, ConfusionMatrix)
                and self.labels == other.labels
                and self.counts == other.counts)

    def __repr__(self):
        return 'ConfusionMatrix(%r, %r)' % (self.labels, self.counts)


def accumulate(cm, true_label, predicted_label):
    """
    Count one (true, predicted) pair.

    Arguments:
        cm: the ConfusionMatrix, changed in place
        true_label: the true label
        predicted_label: the predicted label

    Returns: cm
    """
    i = cm.index(true_label)
    j = cm.index(predicted_label)
    cm.counts[i][j] += 1
    return cm


def _require_counts(cm):
    if cm.total == 0:
        raise InvalidInput('confusion matrix is empty')


def accuracy(cm):
    """
    Return trace / total.
    """
    _require_counts(cm)
    return cm.trace / cm.total


def _ratio(a, b):
    return a / b if b else 0.0


def per_class(cm):
    """
    Return precision, recall, F1 and support for every label.

    Returns: a dictionary from label to
             {'precision', 'recall', 'f1', 'support'}
    """
    scores = {}
    for c, label in enumerate(cm.labels):
        hits = cm.counts[c][c]
        precision = _ratio(hits, cm.col_sum(c))
        recall = _ratio(hits, cm.row_sum(c))
        f1 = _ratio(2 * precision * recall, precision + recall)
        scores[label] = {'precision': precision, 'recall': recall,
                         'f1': f1, 'support': cm.row_sum(c)}
    return scores


def macro_f1(cm):
    """
    Return the unweighted mean of per-class F1 over all labels.
    """
    _require_counts(cm)
    scores = per_class(cm)
    return sum(s['f1'] for s in scores.values()) / len(cm.labels)


@dataclass
class MetricsReport:
    """
    A call-for-help report over one class space.

    Arguments:
        class_space: '3class' or '4class'
        confusion: the ConfusionMatrix
        accuracy: trace / total
        macro_f1: unweighted mean of per-class F1
        per_class: per-label precision, recall, F1 and support
        false_alarm_rate: share of non-emergency items predicted as an
                          emergency class, None without such items
        decoder_invocations: decoder runs behind the events
        tau: the gate threshold the events were produced with
    """
    class_space: str
    confusion: ConfusionMatrix
    accuracy: float
    macro_f1: float
    per_class: dict
    false_alarm_rate: float = None
    decoder_invocations: int = 0
    tau: float = None
    extra: dict = field(default_factory=dict)

    @property
    def labels(self):
        return self.confusion.labels

    @property
    def total(self):
        return self.confusion.total

    def to_dict(self):
        document = {
            'class_space': self.class_space,
            'labels': list(self.labels),
            'confusion': [list(row) for row in self.confusion.counts],
            'accuracy': self.accuracy,
            'macro_f1': self.macro_f1,
            'per_class': self.per_class,
            'decoder_invocations': self.decoder_invocations,
            'total': self.total,
            'false_alarm_rate': self.false_alarm_rate,
            'tau': self.tau,
        }
        document.update(self.extra)
        return document


def build_report(cm, class_space, false_alarm_rate=None,
                 decoder_invocations=0, tau=None):
    """
    Compute every metric of a confusion matrix into a MetricsReport.
    """
    return MetricsReport(class_space, cm, accuracy(cm), macro_f1(cm),
                         per_class(cm), false_alarm_rate,
                         decoder_invocations, tau)


def write_report_json(path, report):
    with open(path, 'w') as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write('\n')


def read_report_json(path):
    """
    Read a report JSON file back into a MetricsReport.
    """
    try:
        with open(path) as f:
            document = json.load(f)
        cm = ConfusionMatrix(document['labels'], document['confusion'])
        extra = {k: v for k, v in document.items()
                 if k not in ('class_space', 'labels', 'confusion',
                              'accuracy', 'macro_f1', 'per_class',
                              'decoder_invocations', 'total',
                              'false_alarm_rate', 'tau')}
        return MetricsReport(document['class_space'], cm,
                             document['accuracy'], document['macro_f1'],
                             document['per_class'],
                             document.get('false_alarm_rate'),
                             document.get('decoder_invocations', 0),
                             document.get('tau'), extra)
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise InvalidInput('cannot read report %s: %s' % (path, e))


def confusion_to_csv(cm):
    """
    Render a confusion matrix as CSV text.

    The header row is an empty corner cell followed by the predicted
    labels; every other row starts with its true label.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow([''] + cm.labels)
    for label, row in zip(cm.labels, cm.counts):
        writer.writerow([label] + row)
    return out.getvalue()


def confusion_from_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    try:
        labels = rows[0][1:]
        require([r[0] for r in rows[1:]] == labels,
                'CSV rows must list the same labels as the header')
        counts = [[int(c) for c in r[1:]] for r in rows[1:]]
    except (IndexError, ValueError) as e:
        raise InvalidInput('bad confusion CSV: %s' % (e,))
    return ConfusionMatrix(labels, counts)


def write_confusion_csv(path, cm):
    with open(path, 'w', newline='') as f:
        f.write(confusion_to_csv(cm))


def read_confusion_csv(path):
    with open(path, newline='') as f:
        return confusion_from_csv(f.read())


def format_table(report):
    """
    Render a report as a human-readable table.
    """
    labels = report.labels
    width = max(9, max(len(l) for l in labels) + 2)
    lines = ['%s report (%d items)' % (report.class_space, report.total),
             '',
             'true \\ pred'.ljust(width + 2)
             + ''.join(l.rjust(width) for l in labels)]
    for label, row in zip(labels, report.confusion.counts):
        lines.append(label.ljust(width + 2)
                     + ''.join(str(c).rjust(width) for c in row))
    lines.append('')
    lines.append('label'.ljust(width + 2) + 'precision'.rjust(11)
                 + 'recall'.rjust(9) + 'f1'.rjust(9) + 'support'.rjust(9))
    for label in labels:
        s = report.per_class[label]
        lines.append(label.ljust(width + 2)
                     + ('%.4f' % s['precision']).rjust(11)
                     + ('%.4f' % s['recall']).rjust(9)
                     + ('%.4f' % s['f1']).rjust(9)
                     + str(s['support']).rjust(9))
    lines.append('')
    lines.append('accuracy          %.4f' % report.accuracy)
    lines.append('macro F1          %.4f' % report.macro_f1)
    if report.false_alarm_rate is not None:
        lines.append('false alarm rate  %.4f' % report.false_alarm_rate)
    skipped = report.total - report.decoder_invocations
    lines.append('decoder runs      %d of %d (%.1f%% skipped)'
                 % (report.decoder_invocations, report.total,
                    100.0 * skipped / report.total if report.total else 0.0))
    return '\n'.join(lines)
