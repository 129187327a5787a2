/** Pure view-model builders.
 *
 * Every screen is a deterministic function of API responses (plus the
 * local unsaved tag overlay), so reloading a page reproduces exactly the
 * same view state from the server: the client owns no authoritative data.
 */

import { buildTokenViewState, tokenColor, TokenViewState } from "./colors.js";
import type {
  AssignmentStatsRow,
  AssignmentSummary,
  AssignmentView,
  IaaReport,
  OwnStats,
  TagLabelInfo,
  TimingStats,
  TokenView,
} from "./types.js";

/** Unsaved tag choices per unit (applied before drafts and committed tags). */
export type LocalTags = Map<string, Map<number, string>>;

export interface UnitViewState {
  unitId: string;
  unitVersion: number;
  tokens: TokenViewState[];
  /** all tokens carry an effective tag (nothing Black) */
  complete: boolean;
  /** all tokens have committed records on the server */
  committed: boolean;
}

export interface AnnotationScreenState {
  assignmentId: string;
  taskId: string;
  pairId: string;
  status: string;
  grade: string | null;
  feedback: string | null;
  editable: boolean;
  units: UnitViewState[];
  blackTokenCount: number;
  /** mirrors the server-side Submit precondition: no Black tokens left */
  submitEnabled: boolean;
}

function effectiveToken(token: TokenView, unitDraft: Record<string, string> | null, local: Map<number, string> | undefined): TokenView {
  const override = local?.get(token.index) ?? unitDraft?.[String(token.index)] ?? null;
  if (override === null) return token;
  return { ...token, manual_tag: override };
}

export function buildAnnotationScreen(
  view: AssignmentView,
  localTags: LocalTags = new Map()
): AnnotationScreenState {
  const units: UnitViewState[] = view.units.map((unit) => {
    const local = localTags.get(unit.unit_id);
    const tokens = unit.tokens.map((token) =>
      buildTokenViewState(effectiveToken(token, unit.draft, local))
    );
    return {
      unitId: unit.unit_id,
      unitVersion: unit.unit_version,
      tokens,
      complete: tokens.every((t) => t.displayColor !== "black"),
      committed:
        unit.tokens.length > 0 && unit.tokens.every((t) => t.committed_tag !== null),
    };
  });
  const blackTokenCount = units.reduce(
    (count, unit) => count + unit.tokens.filter((t) => t.displayColor === "black").length,
    0
  );
  const editable = view.status === "in_progress";
  return {
    assignmentId: view.assignment_id,
    taskId: view.task_id,
    pairId: view.pair_id,
    status: view.status,
    grade: view.grade,
    feedback: view.feedback,
    editable,
    units,
    blackTokenCount,
    submitEnabled: editable && blackTokenCount === 0,
  };
}

/** One row of the annotator's check-status table: progress, speed, grade. */
export interface StatusRow {
  assignmentId: string;
  taskId: string;
  status: string;
  grade: string | null;
  feedback: string | null;
  unitsDone: string; // "3/7"
  tokensDone: string;
  progressPercent: number;
  meanSecondsPerUnit: number | null;
  actionLabel: "start" | "continue" | "re-annotate" | "view";
}

function actionFor(status: string): StatusRow["actionLabel"] {
  if (status === "assigned") return "start";
  if (status === "in_progress") return "continue";
  if (status === "rejected") return "re-annotate";
  return "view";
}

export function buildStatusRows(stats: OwnStats): StatusRow[] {
  return stats.assignments.map((row: AssignmentStatsRow) => ({
    assignmentId: row.assignment_id,
    taskId: row.task_id,
    status: row.status,
    grade: row.grade,
    feedback: row.feedback,
    unitsDone: `${row.n_units_submitted}/${row.n_units}`,
    tokensDone: `${row.n_tokens_annotated}/${row.n_tokens}`,
    progressPercent:
      row.n_tokens === 0 ? 0 : Math.round((100 * row.n_tokens_annotated) / row.n_tokens),
    meanSecondsPerUnit: row.mean_seconds_per_unit,
    actionLabel: actionFor(row.status),
  }));
}

export interface LeadDashboardState {
  submissions: AssignmentSummary[];
  iaa: IaaReport | null;
  iaaUnavailableReason: string | null;
  tagDistribution: Array<{ tag: string; count: number }>;
  timing: TimingStats | null;
}

export function buildLeadDashboard(
  submissions: AssignmentSummary[],
  iaa: IaaReport | null,
  iaaUnavailableReason: string | null,
  distribution: Record<string, number>,
  timing: TimingStats | null
): LeadDashboardState {
  const tagDistribution = Object.entries(distribution)
    .map(([tag, count]) => ({ tag, count }))
    .sort((a, b) => b.count - a.count || (a.tag < b.tag ? -1 : 1));
  return { submissions, iaa, iaaUnavailableReason, tagDistribution, timing };
}

export { tokenColor };
