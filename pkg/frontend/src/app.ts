/**
 * Annotation walkthrough: instructions screen, one blinded item per screen
 * with all three criteria, then a completion screen.
 *
 * The app is a pure client of the annotation service: it renders exactly
 * what the service sends (aliases, never model ids) and posts one rating
 * per criterion. All payload text enters the DOM through textContent, so
 * hostile content in transcripts or the rubric cannot inject markup. The
 * session id is kept in local storage so a refresh resumes mid-study at
 * the service-side cursor.
 */

import { ApiClient, NextResponse, StudyItem } from "./api.js";

export interface AppConfig {
  studyId: string;
  storage?: Storage;
}

const SCORES = [1, 2, 3, 4, 5];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class AnnotationApp {
  private readonly storage: Storage;
  private sessionId: string | null = null;
  private current: StudyItem | null = null;
  private selected = new Map<string, number>();
  private submitting = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    private readonly config: AppConfig,
  ) {
    this.storage = config.storage ?? window.localStorage;
  }

  private get storageKey(): string {
    return `annotation-session:${this.config.studyId}`;
  }

  async start(): Promise<void> {
    await this.showInstructions();
  }

  // -- screens --------------------------------------------------------------

  private async showInstructions(): Promise<void> {
    let rubric: string;
    try {
      rubric = await this.client.instructions();
    } catch (error) {
      this.renderError("Could not reach the annotation service.", () => this.showInstructions());
      return;
    }
    this.clear();
    const screen = el("div", "screen screen-instructions");
    screen.dataset.testid = "instructions";
    screen.appendChild(el("h1", "title", "Response Rating Study"));
    const rubricBox = el("pre", "rubric");
    rubricBox.dataset.testid = "rubric";
    rubricBox.textContent = rubric;
    screen.appendChild(rubricBox);
    const startButton = el("button", "primary", this.hasStoredSession() ? "Resume" : "Start");
    startButton.dataset.testid = "start";
    startButton.addEventListener("click", () => {
      void this.beginSession();
    });
    screen.appendChild(startButton);
    this.root.appendChild(screen);
  }

  private async beginSession(): Promise<void> {
    try {
      if (!this.sessionId) {
        const stored = this.storage.getItem(this.storageKey);
        this.sessionId = stored ?? (await this.client.createSession(this.config.studyId));
        this.storage.setItem(this.storageKey, this.sessionId);
      }
      await this.loadNext();
    } catch (error) {
      this.renderError("Could not start the session.", () => this.beginSession());
    }
  }

  private async loadNext(): Promise<void> {
    if (!this.sessionId) return;
    let next: NextResponse;
    try {
      next = await this.client.nextItem(this.config.studyId, this.sessionId);
    } catch (error) {
      this.renderError("Could not fetch the next item.", () => this.loadNext());
      return;
    }
    if (next.done || !next.item) {
      this.renderDone(next.progress.total);
      return;
    }
    this.current = next.item;
    this.selected = new Map();
    this.renderItem(next.item, next.progress.served, next.progress.total);
  }

  private renderItem(item: StudyItem, position: number, total: number): void {
    this.clear();
    const screen = el("div", "screen screen-item");
    screen.dataset.testid = "item";

    const header = el("div", "item-header");
    const progress = el("span", "progress", `Item ${position} of ${total}`);
    progress.dataset.testid = "progress";
    header.appendChild(progress);
    header.appendChild(el("span", "alias", item.alias));
    screen.appendChild(header);

    const transcript = el("div", "transcript");
    transcript.dataset.testid = "transcript";
    for (const row of item.transcript) {
      if (row.user) {
        const user = el("div", "turn turn-user");
        user.appendChild(el("span", "speaker", "User"));
        user.appendChild(el("span", "text", row.user));
        transcript.appendChild(user);
      }
      const response = el("div", "turn turn-response");
      response.appendChild(el("span", "speaker", "Assistant"));
      response.appendChild(el("span", "text", row.response));
      transcript.appendChild(response);
    }
    screen.appendChild(transcript);

    const form = el("div", "rating-form");
    for (const criterion of item.criteria) {
      const group = el("div", "criterion");
      group.dataset.criterion = criterion;
      group.appendChild(el("span", "criterion-name", this.criterionLabel(criterion)));
      const buttons = el("div", "scores");
      for (const score of SCORES) {
        const button = el("button", "score", String(score));
        button.dataset.testid = `score-${criterion}-${score}`;
        button.addEventListener("click", () => {
          if (this.submitting) return;
          this.selected.set(criterion, score);
          for (const sibling of Array.from(buttons.children)) {
            sibling.classList.toggle("selected", sibling === button);
          }
          this.updateSubmitState();
        });
        buttons.appendChild(button);
      }
      group.appendChild(buttons);
      form.appendChild(group);
    }

    const comment = el("textarea", "comment");
    comment.placeholder = "Leave a comment if a response is unclear or ambiguous (optional)";
    comment.dataset.testid = "comment";
    form.appendChild(comment);

    const submit = el("button", "primary submit", "Submit ratings");
    submit.dataset.testid = "submit";
    submit.disabled = true;
    submit.addEventListener("click", () => {
      void this.submitRatings(comment.value);
    });
    form.appendChild(submit);
    screen.appendChild(form);
    this.root.appendChild(screen);
  }

  private updateSubmitState(): void {
    const submit = this.root.querySelector<HTMLButtonElement>('[data-testid="submit"]');
    if (!submit || !this.current) return;
    const complete = this.current.criteria.every((c) => this.selected.has(c));
    submit.disabled = this.submitting || !complete;
  }

  private async submitRatings(comment: string): Promise<void> {
    if (!this.current || !this.sessionId || this.submitting) return;
    const item = this.current;
    if (!item.criteria.every((c) => this.selected.has(c))) return;
    this.submitting = true;
    this.updateSubmitState();
    try {
      for (const criterion of item.criteria) {
        await this.client.submitRating({
          session_id: this.sessionId,
          item_id: item.item_id,
          criterion,
          score: this.selected.get(criterion) as number,
          comment,
        });
      }
    } catch (error) {
      this.submitting = false;
      this.renderError("Could not submit the ratings.", () => this.submitRatings(comment));
      return;
    }
    this.submitting = false;
    await this.loadNext();
  }

  private renderDone(total: number): void {
    this.clear();
    const screen = el("div", "screen screen-done");
    screen.dataset.testid = "done";
    screen.appendChild(el("h1", "title", "All responses rated"));
    const summary = el("p", "summary", `You completed ${total} of ${total} items. Thank you!`);
    summary.dataset.testid = "done-summary";
    screen.appendChild(summary);
    this.root.appendChild(screen);
  }

  private renderError(message: string, retry: () => Promise<void>): void {
    this.clear();
    const banner = el("div", "banner banner-error");
    banner.dataset.testid = "error";
    banner.appendChild(el("span", "message", message));
    const retryButton = el("button", "retry", "Retry");
    retryButton.dataset.testid = "retry";
    retryButton.addEventListener("click", () => {
      void retry();
    });
    banner.appendChild(retryButton);
    this.root.appendChild(banner);
  }

  private criterionLabel(criterion: string): string {
    const words = criterion.toLowerCase().split("_");
    return words.map((w) => (w ? w[0]!.toUpperCase() + w.slice(1) : w)).join(" ");
  }

  private hasStoredSession(): boolean {
    return this.storage.getItem(this.storageKey) !== null;
  }

  private clear(): void {
    this.root.textContent = "";
  }
}
