/** Draft synchronization with retry.
 *
 * Tag choices apply locally at once and are pushed to the server as
 * drafts. A failed push leaves the unit marked pending so the next flush
 * retries it: a chosen tag is never silently dropped.
 */

export type SaveDraftFn = (
  unitId: string,
  tags: Record<number, string>
) => Promise<void>;

export type UnitSyncState = "clean" | "pending" | "failed";

export class DraftSync {
  private tags = new Map<string, Map<number, string>>();
  private states = new Map<string, UnitSyncState>();

  constructor(private save: SaveDraftFn) {}

  /** Record a tag choice locally and mark the unit for upload. */
  apply(unitId: string, index: number, tag: string): void {
    const unit = this.tags.get(unitId) ?? new Map<number, string>();
    unit.set(index, tag);
    this.tags.set(unitId, unit);
    this.states.set(unitId, "pending");
  }

  localTags(unitId: string): Map<number, string> {
    return this.tags.get(unitId) ?? new Map();
  }

  /** The local overlay for view building. */
  overlay(): Map<string, Map<number, string>> {
    return this.tags;
  }

  state(unitId: string): UnitSyncState {
    return this.states.get(unitId) ?? "clean";
  }

  pendingUnits(): string[] {
    return [...this.states.entries()]
      .filter(([, state]) => state !== "clean")
      .map(([unitId]) => unitId)
      .sort();
  }

  /** Push every pending unit; failures stay pending for the next flush. */
  async flush(): Promise<{ saved: string[]; failed: string[] }> {
    const saved: string[] = [];
    const failed: string[] = [];
    for (const unitId of this.pendingUnits()) {
      const unit = this.tags.get(unitId);
      if (!unit) continue;
      const payload: Record<number, string> = {};
      for (const [index, tag] of unit) payload[index] = tag;
      try {
        await this.save(unitId, payload);
        this.states.set(unitId, "clean");
        saved.push(unitId);
      } catch {
        this.states.set(unitId, "failed");
        failed.push(unitId);
      }
    }
    return { saved, failed };
  }

  /** Forget local state for a unit (after a successful commit). */
  clear(unitId: string): void {
    this.tags.delete(unitId);
    this.states.delete(unitId);
  }
}
