/** Payload shapes of the JSON API. The client holds no state of its own:
 * every screen is rebuilt from these responses. */

export type RoleName = "annotator" | "lead_annotator" | "superuser";

export interface UserInfo {
  user_id: string;
  username: string;
  role: RoleName;
  language_pairs: string[];
  active: boolean;
}

export interface LoginResponse {
  token: string;
  user: UserInfo;
  expires_at: string;
}

export interface TagLabelInfo {
  name: string;
  category: "language" | "special";
  color: string;
  auto_assignable: boolean;
}

export interface PairInfo {
  pair_id: string;
  lang_primary: string;
  lang_secondary: string;
  tag_set: TagLabelInfo[];
}

export type AssignmentStatus =
  | "assigned"
  | "in_progress"
  | "submitted"
  | "accepted"
  | "rejected";

export interface AssignmentSummary {
  assignment_id: string;
  task_id: string;
  annotator_id: string;
  unit_ids: string[];
  status: AssignmentStatus;
  grade: "pass" | "no_pass" | null;
  feedback: string | null;
}

export interface TokenView {
  index: number;
  surface: string;
  char_start: number;
  char_end: number;
  auto_tag: string | null;
  manual_tag: string | null;
  committed_tag: string | null;
}

export interface UnitView {
  unit_id: string;
  genre: string;
  text: string | null;
  source_meta: Record<string, string>;
  tokens: TokenView[];
  draft: Record<string, string> | null;
  unit_version: number;
  duration_seconds: number | null;
}

export interface AssignmentView {
  assignment_id: string;
  task_id: string;
  pair_id: string;
  annotator_id: string;
  status: AssignmentStatus;
  grade: "pass" | "no_pass" | null;
  feedback: string | null;
  version: number;
  units: UnitView[];
}

export interface AssignmentStatsRow {
  assignment_id: string;
  task_id: string;
  status: AssignmentStatus;
  grade: "pass" | "no_pass" | null;
  feedback: string | null;
  n_units: number;
  n_units_submitted: number;
  n_tokens: number;
  n_tokens_annotated: number;
  mean_seconds_per_unit: number | null;
}

export interface OwnStats {
  annotator_id: string;
  assignments: AssignmentStatsRow[];
  n_tokens_annotated: number;
  timing: {
    n: number;
    mean: number | null;
    median: number | null;
    min: number | null;
    max: number | null;
  };
}

export interface TaskInfo {
  task_id: string;
  pair_id: string;
  genre: string;
  unit_ids: string[];
  overlap_percent: number;
  created_by: string;
}

export interface IaaPairEntry {
  annotator_a: string;
  annotator_b: string;
  observed_agreement: number;
  kappa: number | null;
  n_tokens: number;
}

export interface IaaReport {
  pairs: IaaPairEntry[];
  mean_observed_agreement: number;
}

export interface TimingStats {
  n: number;
  mean: number | null;
  median: number | null;
  min: number | null;
  max: number | null;
}
