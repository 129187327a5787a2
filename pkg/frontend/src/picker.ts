/** Tag picker popup model: the pair's labels grouped language-tags-first,
 * then special tags, preserving the tag set's own ordering inside each
 * group. Cancel is represented by a null choice and changes nothing. */

import type { TagLabelInfo } from "./types.js";

export interface PickerGroup {
  label: "Language tags" | "Special tags";
  tags: TagLabelInfo[];
}

export interface PickerModel {
  groups: PickerGroup[];
}

export function buildTagPicker(tagSet: TagLabelInfo[]): PickerModel {
  return {
    groups: [
      { label: "Language tags", tags: tagSet.filter((t) => t.category === "language") },
      { label: "Special tags", tags: tagSet.filter((t) => t.category === "special") },
    ],
  };
}

/** null = cancelled: the token keeps whatever tag and color it had. */
export type PickerChoice = string | null;

export function applyChoice(
  current: Map<number, string>,
  index: number,
  choice: PickerChoice
): Map<number, string> {
  if (choice === null) return current;
  const next = new Map(current);
  next.set(index, choice);
  return next;
}
