/** DOM shell: hash-routed screens over the pure view-model builders.
 *
 * Screens: login, annotator check-status list, token-clicking annotation
 * screen with the tag-picker popup, lead dashboard (submissions queue,
 * grading form, agreement and distribution views), superuser console.
 * Conflicting writes surface the server's 409 as a reload prompt.
 */

import { ApiClient, ApiError } from "./api.js";
import { PALETTE } from "./colors.js";
import { DraftSync } from "./pending.js";
import { applyChoice, buildTagPicker } from "./picker.js";
import type { PairInfo, TagLabelInfo, UserInfo } from "./types.js";
import {
  AnnotationScreenState,
  buildAnnotationScreen,
  buildLeadDashboard,
  buildStatusRows,
} from "./viewstate.js";

const api = new ApiClient("");
let currentUser: UserInfo | null = null;

const root = () => document.getElementById("app")!;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function banner(message: string, kind: "error" | "info" = "error"): void {
  const zone = document.getElementById("banner")!;
  zone.replaceChildren(el("div", { class: `banner ${kind}` }, message));
  setTimeout(() => zone.replaceChildren(), 6000);
}

function handleFailure(err: unknown): void {
  if (err instanceof ApiError && err.status === 409) {
    banner(`Someone else changed this first (${err.message}). Reload to continue.`);
  } else if (err instanceof ApiError && err.status === 401) {
    location.hash = "#/login";
  } else {
    banner(err instanceof Error ? err.message : String(err));
  }
}

// ---------------------------------------------------------------- login

function renderLogin(): void {
  const username = el("input", { placeholder: "username", autocomplete: "username" });
  const password = el("input", { placeholder: "password", type: "password" });
  const button = el("button", {}, "Sign in") as HTMLButtonElement;
  const update = () => {
    button.disabled = !(username.value.trim() && password.value);
  };
  username.addEventListener("input", update);
  password.addEventListener("input", update);
  update();
  button.addEventListener("click", async () => {
    try {
      const result = await api.login(username.value.trim(), password.value);
      currentUser = result.user;
      location.hash =
        result.user.role === "annotator"
          ? "#/tasks"
          : result.user.role === "lead_annotator"
            ? "#/lead"
            : "#/admin";
    } catch (err) {
      handleFailure(err);
    }
  });
  root().replaceChildren(
    el("div", { class: "card login" }, el("h1", {}, "csanno"), username, password, button)
  );
}

// ------------------------------------------------------- annotator screens

async function renderStatusList(): Promise<void> {
  const stats = await api.myStats();
  const rows = buildStatusRows(stats);
  const table = el(
    "table",
    { class: "status" },
    el(
      "tr",
      {},
      ...["task", "status", "units", "tokens", "speed (s/unit)", "grade", ""].map((h) =>
        el("th", {}, h)
      )
    )
  );
  for (const row of rows) {
    const open = el("button", {}, row.actionLabel) as HTMLButtonElement;
    open.addEventListener("click", async () => {
      if (row.status === "assigned" || row.status === "rejected") {
        try {
          await api.startAssignment(row.assignmentId);
        } catch (err) {
          handleFailure(err);
          return;
        }
      }
      location.hash = `#/annotate/${row.assignmentId}`;
    });
    table.append(
      el(
        "tr",
        {},
        el("td", {}, row.taskId),
        el("td", {}, row.status),
        el("td", {}, row.unitsDone),
        el("td", {}, `${row.tokensDone} (${row.progressPercent}%)`),
        el("td", {}, row.meanSecondsPerUnit === null ? "-" : row.meanSecondsPerUnit.toFixed(1)),
        el("td", {}, row.grade ?? "-", row.feedback ? ` — ${row.feedback}` : ""),
        el("td", {}, open)
      )
    );
  }
  root().replaceChildren(
    el("div", { class: "card" }, el("h2", {}, `Assignments — ${currentUser?.username}`), table)
  );
}

async function tagSetForPair(pairId: string): Promise<TagLabelInfo[]> {
  const pairs: PairInfo[] = await api.listPairs();
  const pair = pairs.find((p) => p.pair_id === pairId);
  return pair ? pair.tag_set : [];
}

function openPicker(
  tagSet: TagLabelInfo[],
  onChoice: (choice: string | null) => void
): void {
  const model = buildTagPicker(tagSet);
  const popup = el("div", { class: "picker" });
  for (const group of model.groups) {
    popup.append(el("h4", {}, group.label));
    const zone = el("div", { class: "picker-group" });
    for (const tag of group.tags) {
      const button = el("button", { class: "tag", style: `border-color:${tag.color}` }, tag.name);
      button.addEventListener("click", () => {
        overlay.remove();
        onChoice(tag.name);
      });
      zone.append(button);
    }
    popup.append(zone);
  }
  const cancel = el("button", { class: "cancel" }, "cancel");
  cancel.addEventListener("click", () => {
    overlay.remove();
    onChoice(null);
  });
  popup.append(cancel);
  const overlay = el("div", { class: "overlay" }, popup);
  overlay.addEventListener("click", (event) => {
    if (event.target === overlay) {
      overlay.remove();
      onChoice(null);
    }
  });
  document.body.append(overlay);
}

async function renderAnnotation(assignmentId: string): Promise<void> {
  const view = await api.getAssignment(assignmentId);
  const tagSet = await tagSetForPair(view.pair_id);
  const sync = new DraftSync((unitId, tags) => api.saveDraft(assignmentId, unitId, tags).then(() => undefined));
  const versions = new Map(view.units.map((u) => [u.unit_id, u.unit_version]));

  const redraw = () => {
    const screen = buildAnnotationScreen(view, sync.overlay());
    paint(screen);
  };

  const paint = (screen: AnnotationScreenState) => {
    const container = el("div", { class: "card" });
    container.append(
      el(
        "h2",
        {},
        `Assignment ${screen.assignmentId} — ${screen.status}`,
        screen.feedback ? ` (feedback: ${screen.feedback})` : ""
      )
    );
    for (const unit of screen.units) {
      const line = el("p", { class: "unit", dir: "auto" });
      for (const token of unit.tokens) {
        const span = el(
          "span",
          { class: "token", style: `color:${PALETTE[token.displayColor]}` },
          token.surface
        );
        span.title = token.effectiveTag ?? "untagged";
        if (screen.editable && token.clickable) {
          span.addEventListener("click", () =>
            openPicker(tagSet, async (choice) => {
              if (choice === null) return; // cancel: nothing changes
              applyChoice(sync.localTags(unit.unitId), token.index, choice);
              sync.apply(unit.unitId, token.index, choice);
              const { failed } = await sync.flush();
              if (failed.length) banner("draft not saved yet; will retry", "info");
              redraw();
            })
          );
        }
        line.append(span, " ");
      }
      const commit = el("button", {}, "commit unit") as HTMLButtonElement;
      commit.disabled = !screen.editable || !unit.complete;
      commit.addEventListener("click", async () => {
        const tags: Record<number, string> = {};
        for (const token of unit.tokens) {
          if (token.effectiveTag !== null) tags[token.index] = token.effectiveTag;
        }
        try {
          const result = await api.submitUnit(
            assignmentId,
            unit.unitId,
            tags,
            versions.get(unit.unitId) ?? 0
          );
          versions.set(unit.unitId, result.unit_version);
          sync.clear(unit.unitId);
          banner(`unit ${unit.unitId} committed`, "info");
        } catch (err) {
          handleFailure(err);
        }
      });
      const state = sync.state(unit.unitId);
      container.append(
        el(
          "div",
          { class: "unit-row" },
          line,
          state !== "clean" ? el("span", { class: "pending" }, state) : "",
          unit.committed ? el("span", { class: "done" }, "committed") : "",
          commit
        )
      );
    }
    const submit = el("button", { class: "primary" }, "Submit assignment") as HTMLButtonElement;
    submit.disabled = !screen.submitEnabled;
    submit.title = screen.submitEnabled
      ? "submit for review"
      : `${screen.blackTokenCount} tokens still untagged`;
    submit.addEventListener("click", async () => {
      try {
        await api.submitAssignment(assignmentId);
        location.hash = "#/tasks";
      } catch (err) {
        handleFailure(err);
      }
    });
    container.append(submit);
    root().replaceChildren(container);
  };

  redraw();
}

// ------------------------------------------------------------ lead screens

async function renderLeadDashboard(): Promise<void> {
  const tasks = await api.listTasks();
  const container = el("div", { class: "card" }, el("h2", {}, "Lead dashboard"));
  for (const task of tasks) {
    const section = el(
      "div",
      { class: "task-block" },
      el("h3", {}, `${task.task_id} (${task.genre}, overlap ${task.overlap_percent})`)
    );
    const submissions = await api.submissions(task.task_id);
    let iaa = null;
    let reason: string | null = null;
    try {
      iaa = await api.iaa(task.task_id);
    } catch (err) {
      reason = err instanceof Error ? err.message : String(err);
    }
    const distribution = await api.tagDistribution(task.task_id);
    const timing = await api.timing(task.task_id);
    const dashboard = buildLeadDashboard(submissions, iaa, reason, distribution, timing);

    for (const submission of dashboard.submissions) {
      const feedback = el("input", { placeholder: "feedback" });
      const pass = el("button", {}, "pass");
      const noPass = el("button", {}, "no pass");
      const grade = (value: "pass" | "no_pass") => async () => {
        try {
          await api.reviewAssignment(submission.assignment_id, value, feedback.value || undefined);
          banner(`graded ${submission.assignment_id}: ${value}`, "info");
          await renderLeadDashboard();
        } catch (err) {
          handleFailure(err);
        }
      };
      pass.addEventListener("click", grade("pass"));
      noPass.addEventListener("click", grade("no_pass"));
      section.append(
        el(
          "div",
          { class: "submission" },
          `${submission.annotator_id} — ${submission.unit_ids.length} units `,
          feedback,
          pass,
          noPass
        )
      );
    }
    if (dashboard.iaa) {
      for (const pair of dashboard.iaa.pairs) {
        section.append(
          el(
            "div",
            {},
            `IAA ${pair.annotator_a} vs ${pair.annotator_b}: ` +
              `observed ${pair.observed_agreement.toFixed(3)}, kappa ` +
              (pair.kappa === null ? "n/a" : pair.kappa.toFixed(3)) +
              ` over ${pair.n_tokens} tokens`
          )
        );
      }
    } else if (dashboard.iaaUnavailableReason) {
      section.append(el("div", { class: "muted" }, `IAA unavailable: ${dashboard.iaaUnavailableReason}`));
    }
    if (dashboard.tagDistribution.length) {
      section.append(
        el(
          "div",
          {},
          "tags: " + dashboard.tagDistribution.map((d) => `${d.tag}:${d.count}`).join(" ")
        )
      );
    }
    if (dashboard.timing && dashboard.timing.n > 0 && dashboard.timing.mean !== null) {
      section.append(
        el("div", {}, `timing: ${dashboard.timing.n} units, mean ${dashboard.timing.mean.toFixed(1)}s`)
      );
    }
    container.append(section);
  }
  root().replaceChildren(container);
}

// ------------------------------------------------------- superuser console

async function renderAdmin(): Promise<void> {
  const users = await api.listUsers();
  const container = el("div", { class: "card" }, el("h2", {}, "Superuser console"));
  const table = el(
    "table",
    {},
    el("tr", {}, ...["user", "role", "pairs", "active", ""].map((h) => el("th", {}, h)))
  );
  for (const user of users) {
    const off = el("button", {}, "deactivate") as HTMLButtonElement;
    off.disabled = user.role === "superuser" || !user.active;
    off.addEventListener("click", async () => {
      try {
        await api.deactivateUser(user.user_id);
        await renderAdmin();
      } catch (err) {
        handleFailure(err);
      }
    });
    table.append(
      el(
        "tr",
        {},
        el("td", {}, user.username),
        el("td", {}, user.role),
        el("td", {}, user.language_pairs.join(", ")),
        el("td", {}, String(user.active)),
        el("td", {}, off)
      )
    );
  }
  container.append(table);

  const lines = el("textarea", { placeholder: "one text line per unit" });
  const pairField = el("input", { placeholder: "pair id" });
  const ingest = el("button", {}, "ingest plain lines");
  ingest.addEventListener("click", async () => {
    try {
      const result = await api.ingest({
        pair_id: pairField.value.trim(),
        genre: "plain",
        lines: lines.value.split("\n"),
      });
      banner(`ingested ${result.ingested} units (${result.skipped} skipped)`, "info");
    } catch (err) {
      handleFailure(err);
    }
  });
  const exportButton = el("button", {}, "export corpus XML");
  exportButton.addEventListener("click", async () => {
    try {
      const document_ = await api.exportXml("corpus");
      const blob = new Blob([document_], { type: "application/xml" });
      const link = el("a", { href: URL.createObjectURL(blob), download: "corpus.xml" });
      link.click();
    } catch (err) {
      handleFailure(err);
    }
  });
  container.append(
    el("h3", {}, "Corpus"),
    el("div", { class: "ingest-form" }, pairField, lines, ingest, exportButton)
  );
  root().replaceChildren(container);
}

// ---------------------------------------------------------------- routing

async function route(): Promise<void> {
  const hash = location.hash || "#/login";
  try {
    if (!currentUser && hash !== "#/login") {
      location.hash = "#/login";
      return;
    }
    if (hash === "#/login") renderLogin();
    else if (hash === "#/tasks") await renderStatusList();
    else if (hash.startsWith("#/annotate/")) await renderAnnotation(hash.slice("#/annotate/".length));
    else if (hash === "#/lead") await renderLeadDashboard();
    else if (hash === "#/admin") await renderAdmin();
    else renderLogin();
  } catch (err) {
    handleFailure(err);
  }
}

window.addEventListener("hashchange", route);
window.addEventListener("DOMContentLoaded", route);
