/**
 * Requester dashboard view models over the report JSON: exam score
 * histogram, per-question error bars, progress, and the implied hourly
 * pay for an entered reward.
 */

export interface HistogramBar {
  score: string;
  count: number;
  fraction: number; // of all graded attempts
}

export interface QuestionBar {
  questionId: string;
  shown: number;
  errors: number;
  errorRate: number;
}

export interface ExamReportDoc {
  graded_attempts: number;
  participants: number;
  passed: number;
  histogram: Record<string, number>;
  questions: Record<
    string,
    { shown: number; errors: number; error_rate: number }
  >;
}

export function histogramBars(report: ExamReportDoc): HistogramBar[] {
  const total = report.graded_attempts;
  return Object.entries(report.histogram)
    .sort((a, b) => Number(a[0]) - Number(b[0]))
    .map(([score, count]) => ({
      score,
      count,
      fraction: total > 0 ? count / total : 0,
    }));
}

export function questionBars(report: ExamReportDoc): QuestionBar[] {
  return Object.entries(report.questions)
    .sort((a, b) => (a[0] < b[0] ? -1 : 1))
    .map(([questionId, q]) => ({
      questionId,
      shown: q.shown,
      errors: q.errors,
      errorRate: q.error_rate,
    }));
}

export function payRate(meanDurationSeconds: number, reward: number): number {
  if (meanDurationSeconds <= 0) throw new Error("duration must be positive");
  return (reward * 3600) / meanDurationSeconds;
}

export function payRateDisplay(meanDurationSeconds: number, reward: number): string {
  return `$${payRate(meanDurationSeconds, reward).toFixed(2)}/hr`;
}

export interface TaskSetReportDoc {
  tasks_total: number;
  tasks_complete: number;
  tasks_in_progress: number;
  submissions: number;
  mean_duration_seconds: number | null;
  median_duration_seconds: number | null;
  implied_hourly_pay: number | null;
  agreement: Record<string, { percent_agreement: number; kappa: number }>;
}

export interface ProgressView {
  completeLabel: string;
  submissions: number;
  meanSeconds: number | null;
  payForReward: (reward: number) => string | null;
  agreementRows: { annotationId: string; percent: number; kappa: number }[];
}

export function progressView(report: TaskSetReportDoc): ProgressView {
  return {
    completeLabel: `${report.tasks_complete}/${report.tasks_total}`,
    submissions: report.submissions,
    meanSeconds: report.mean_duration_seconds,
    payForReward: (reward: number) =>
      report.mean_duration_seconds
        ? payRateDisplay(report.mean_duration_seconds, reward)
        : null,
    agreementRows: Object.entries(report.agreement)
      .sort((a, b) => (a[0] < b[0] ? -1 : 1))
      .map(([annotationId, a]) => ({
        annotationId,
        percent: a.percent_agreement,
        kappa: a.kappa,
      })),
  };
}
